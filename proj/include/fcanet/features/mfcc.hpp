#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "fcanet/features/audio.hpp"

namespace fcanet::features {

struct MfccParams {
  int sample_rate = kSampleRate;
  std::size_t n_mfcc = 40;
  std::size_t n_fft = 400;
  std::size_t hop_length = 160;
  std::size_t n_mels = 64;
  double f_min = 20.0;
  double f_max = 8000.0;

  void validate() const;
  std::size_t n_freqs() const { return n_fft / 2 + 1; }
  std::size_t n_frames(std::size_t samples) const { return samples / hop_length + 1; }
};

// Row-major [bins x frames] plane of real values.
struct FeatureMap {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(std::size_t b, std::size_t f) : bins(b), frames(f), values(b * f, 0.0) {}
  double& at(std::size_t b, std::size_t t) { return values[b * frames + t]; }
  double at(std::size_t b, std::size_t t) const { return values[b * frames + t]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Centered STFT (reflect padding, periodic Hann), power spectrum, HTK
// triangular mel filterbank, log with a 1e-10 floor, orthonormal DCT-II.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccParams params = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  const MfccParams& params() const { return params_; }

  // [n_mels x frames] mel energies of a padded one-second clip.
  FeatureMap mel_spectrogram(const AudioClip& clip) const;
  // [n_mfcc x frames] from nonnegative mel energies.
  FeatureMap mfcc(const FeatureMap& mel) const;
  FeatureMap operator()(const AudioClip& clip) const { return mfcc(mel_spectrogram(clip)); }

  // |DFT|^2 of one already-windowed n_fft frame, bins 0..n_fft/2.
  std::vector<double> power_spectrum(std::span<const double> windowed_frame) const;

  const std::vector<double>& window() const { return window_; }
  // [n_mels x n_freqs] filter weights.
  const std::vector<double>& filterbank() const { return filterbank_; }
  // Center frequency (Hz) of each mel filter.
  const std::vector<double>& centers() const { return centers_; }

 private:
  MfccParams params_;
  std::vector<double> window_;
  std::vector<double> filterbank_;
  std::vector<double> centers_;
  std::vector<double> dct_;  // [n_mfcc x n_mels]
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

struct MaskDraw {
  std::size_t time_start = 0, time_width = 0;
  std::size_t freq_start = 0, freq_width = 0;
};

// One time stripe and one frequency stripe, widths uniform on {0..max_width}
// clamped to the axis length, start uniform over valid positions.
MaskDraw draw_spec_mask(std::size_t bins, std::size_t frames, std::size_t max_width, std::mt19937_64& rng);
FeatureMap apply_spec_mask(const FeatureMap& feat, const MaskDraw& draw);
FeatureMap spec_mask(const FeatureMap& feat, std::mt19937_64& rng, std::size_t max_width = 25);

}  // namespace fcanet::features
