#include "fcanet/data/mixing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "fcanet/common/errors.hpp"

namespace fcanet::data {

namespace {

constexpr int kMaxSegmentDraws = 10;

std::string format_db(double db) {
  if (db == std::floor(db)) return std::to_string(static_cast<long long>(db));
  std::string s = std::to_string(db);
  while (s.back() == '0') s.pop_back();
  return s;
}

}  // namespace

std::string MixCondition::name() const { return is_clean() ? "clean" : format_db(snr_db); }

MixCondition parse_condition(std::string_view text) {
  if (text == "clean") return MixCondition::clean();
  std::string s(text);
  if (s.size() > 2 && s.ends_with("dB")) s.resize(s.size() - 2);
  double db = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), db);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(db)) {
    throw ArgumentError("condition must be 'clean' or an SNR in dB, got '" + std::string(text) + "'");
  }
  return MixCondition::at(db);
}

std::array<MixCondition, 5> eval_conditions() {
  return {MixCondition::clean(), MixCondition::at(20.0), MixCondition::at(0.0), MixCondition::at(-5.0),
          MixCondition::at(-10.0)};
}

std::vector<double> noise_segment(std::span<const float> noise, std::size_t offset) {
  if (noise.empty()) throw DataError("empty noise source");
  std::vector<double> seg(features::kClipSamples);
  for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = noise[(offset + i) % noise.size()];
  return seg;
}

std::vector<double> random_noise_segment(std::span<const float> noise, std::mt19937_64& rng) {
  if (noise.empty()) throw DataError("empty noise source");
  const std::size_t last = noise.size() >= features::kClipSamples ? noise.size() - features::kClipSamples
                                                                   : noise.size() - 1;
  return noise_segment(noise, std::uniform_int_distribution<std::size_t>(0, last)(rng));
}

double snr_db(std::span<const double> speech, std::span<const double> noise) {
  return 10.0 * std::log10(features::mean_square(speech) / features::mean_square(noise));
}

MixResult mix_at_snr(const features::AudioClip& speech, std::span<const float> noise, double snr_db,
                     std::mt19937_64& rng) {
  if (speech.samples.size() != features::kClipSamples) throw ArgumentError("mix_at_snr: speech must be one second");
  const double ps = features::mean_square(speech.samples);
  if (!(ps > 0.0)) throw DataError("mix_at_snr: silent speech clip '" + speech.source_id + "'");

  std::vector<double> seg;
  double pn = 0.0;
  for (int draw = 0; draw < kMaxSegmentDraws && !(pn > 0.0); ++draw) {
    seg = random_noise_segment(noise, rng);
    pn = features::mean_square(seg);
  }
  if (!(pn > 0.0)) throw DataError("mix_at_snr: no audible noise segment after 10 draws");

  MixResult r;
  r.gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  r.speech = speech.samples;
  r.noise = std::move(seg);
  for (double& v : r.noise) v *= r.gain;

  r.mixed = speech;
  double peak = 0.0;
  for (std::size_t i = 0; i < r.speech.size(); ++i) {
    r.mixed.samples[i] = r.speech[i] + r.noise[i];
    peak = std::max(peak, std::abs(r.mixed.samples[i]));
  }
  if (peak > 1.0) {
    r.rescale = 1.0 / peak;
    for (double& v : r.mixed.samples) v *= r.rescale;
  }
  return r;
}

features::AudioClip apply_condition(const features::AudioClip& speech, const MixCondition& condition,
                                    std::span<const float> noise, std::mt19937_64& rng) {
  if (condition.is_clean()) return speech;
  return mix_at_snr(speech, noise, condition.snr_db, rng).mixed;
}

}  // namespace fcanet::data
