#include "fcanet/features/mfcc.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "fcanet/common/errors.hpp"

namespace fcanet::features {

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kLogFloor = 1e-10;

}  // namespace

struct MfccExtractor::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
  }
};

void MfccParams::validate() const {
  if (sample_rate <= 0 || n_fft == 0 || hop_length == 0 || n_mels == 0 || n_mfcc == 0) {
    throw ConfigError("mfcc: sizes and rates must be positive");
  }
  if (n_mfcc > n_mels) throw ConfigError("mfcc: n_mfcc must not exceed n_mels");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("mfcc: need 0 <= f_min < f_max <= sample_rate/2");
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MfccExtractor::MfccExtractor(MfccParams params) : params_(params), plan_(std::make_unique<Plan>()) {
  params_.validate();
  const std::size_t n_fft = params_.n_fft, n_freqs = params_.n_freqs(), n_mels = params_.n_mels;

  window_.resize(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n) {
    window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(n_fft));
  }

  // Mel-spaced corner frequencies; filter m rises over [f_m, f_m+1] and falls over [f_m+1, f_m+2].
  const double m_lo = hz_to_mel(params_.f_min), m_hi = hz_to_mel(params_.f_max);
  std::vector<double> corners(n_mels + 2);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    corners[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  filterbank_.assign(n_mels * n_freqs, 0.0);
  centers_.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    centers_[m] = corners[m + 1];
    for (std::size_t k = 0; k < n_freqs; ++k) {
      const double f = static_cast<double>(params_.sample_rate) / 2.0 * static_cast<double>(k) /
                       static_cast<double>(n_freqs - 1);
      const double down = (f - corners[m]) / (corners[m + 1] - corners[m]);
      const double up = (corners[m + 2] - f) / (corners[m + 2] - corners[m + 1]);
      filterbank_[m * n_freqs + k] = std::max(0.0, std::min(down, up));
    }
  }

  dct_.resize(params_.n_mfcc * n_mels);
  const double n = static_cast<double>(n_mels);
  for (std::size_t k = 0; k < params_.n_mfcc; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < n_mels; ++i) {
      dct_[k * n_mels + i] =
          norm * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n));
    }
  }

  std::vector<double> in(n_fft);
  std::vector<std::complex<double>> out(n_freqs);
  std::lock_guard lock(planner_mutex());
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_->plan) throw ConfigError("mfcc: FFT planning failed");
}

MfccExtractor::~MfccExtractor() = default;

std::vector<double> MfccExtractor::power_spectrum(std::span<const double> windowed_frame) const {
  if (windowed_frame.size() != params_.n_fft) throw ArgumentError("power_spectrum: frame length must equal n_fft");
  std::vector<double> in(windowed_frame.begin(), windowed_frame.end());
  std::vector<std::complex<double>> out(params_.n_freqs());
  fftw_execute_dft_r2c(plan_->plan, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  std::vector<double> power(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) power[k] = std::norm(out[k]);
  return power;
}

FeatureMap MfccExtractor::mel_spectrogram(const AudioClip& clip) const {
  if (clip.samples.size() != kClipSamples) {
    throw ArgumentError("mel_spectrogram: clip must be padded to 16000 samples, got " +
                        std::to_string(clip.samples.size()));
  }
  const std::size_t n_fft = params_.n_fft, hop = params_.hop_length, n_freqs = params_.n_freqs();
  const auto len = static_cast<std::ptrdiff_t>(clip.samples.size());
  const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);
  const std::size_t frames = params_.n_frames(clip.samples.size());

  FeatureMap mel(params_.n_mels, frames);
  std::vector<double> frame(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < n_fft; ++n) {
      std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t * hop + n) - half;
      if (j < 0) j = -j;
      if (j >= len) j = 2 * len - 2 - j;
      frame[n] = clip.samples[static_cast<std::size_t>(j)] * window_[n];
    }
    const std::vector<double> power = power_spectrum(frame);
    for (std::size_t m = 0; m < params_.n_mels; ++m) {
      const double* fb = filterbank_.data() + m * n_freqs;
      double acc = 0.0;
      for (std::size_t k = 0; k < n_freqs; ++k) acc += fb[k] * power[k];
      mel.at(m, t) = acc;
    }
  }
  return mel;
}

FeatureMap MfccExtractor::mfcc(const FeatureMap& mel) const {
  if (mel.bins != params_.n_mels) throw ShapeError("mfcc: expected " + std::to_string(params_.n_mels) + " mel bins");
  for (double v : mel.values) {
    if (!(v >= 0.0)) throw ArgumentError("mfcc: mel energies must be nonnegative");
  }
  FeatureMap out(params_.n_mfcc, mel.frames);
  std::vector<double> logmel(params_.n_mels);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t m = 0; m < params_.n_mels; ++m) logmel[m] = std::log(mel.at(m, t) + kLogFloor);
    for (std::size_t k = 0; k < params_.n_mfcc; ++k) {
      const double* row = dct_.data() + k * params_.n_mels;
      double acc = 0.0;
      for (std::size_t m = 0; m < params_.n_mels; ++m) acc += row[m] * logmel[m];
      out.at(k, t) = acc;
    }
  }
  return out;
}

MaskDraw draw_spec_mask(std::size_t bins, std::size_t frames, std::size_t max_width, std::mt19937_64& rng) {
  auto stripe = [&](std::size_t axis, std::size_t& start, std::size_t& width) {
    width = std::min(std::uniform_int_distribution<std::size_t>(0, max_width)(rng), axis);
    start = std::uniform_int_distribution<std::size_t>(0, axis - width)(rng);
  };
  MaskDraw d;
  stripe(frames, d.time_start, d.time_width);
  stripe(bins, d.freq_start, d.freq_width);
  return d;
}

FeatureMap apply_spec_mask(const FeatureMap& feat, const MaskDraw& draw) {
  FeatureMap out = feat;
  for (std::size_t b = 0; b < out.bins; ++b) {
    const bool freq_masked = b >= draw.freq_start && b < draw.freq_start + draw.freq_width;
    for (std::size_t t = 0; t < out.frames; ++t) {
      const bool time_masked = t >= draw.time_start && t < draw.time_start + draw.time_width;
      if (freq_masked || time_masked) out.at(b, t) = 0.0;
    }
  }
  return out;
}

FeatureMap spec_mask(const FeatureMap& feat, std::mt19937_64& rng, std::size_t max_width) {
  return apply_spec_mask(feat, draw_spec_mask(feat.bins, feat.frames, max_width, rng));
}

}  // namespace fcanet::features
