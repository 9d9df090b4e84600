#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcanet/features/audio.hpp"

namespace fcanet::data {

struct MixCondition {
  enum class Kind { clean, snr };
  Kind kind = Kind::clean;
  double snr_db = 0.0;

  static MixCondition clean() { return {}; }
  static MixCondition at(double db) { return {Kind::snr, db}; }
  bool is_clean() const { return kind == Kind::clean; }
  // "clean", "20", "0", "-5", "-10".
  std::string name() const;
  friend bool operator==(const MixCondition&, const MixCondition&) = default;
};

// Inverse of name(); a trailing "dB" is accepted. Throws ArgumentError.
MixCondition parse_condition(std::string_view text);

// The five evaluation conditions, clean first.
std::array<MixCondition, 5> eval_conditions();

struct MixResult {
  features::AudioClip mixed;
  std::vector<double> speech;  // components before any joint rescale
  std::vector<double> noise;   // already multiplied by `gain`
  double gain = 0.0;
  double rescale = 1.0;  // applied to both components when the sum would clip
};

// Noise sources are kept as float: 16-bit PCM converts to it exactly.

// One-second window of `noise` starting at `offset`; shorter sources are tiled.
std::vector<double> noise_segment(std::span<const float> noise, std::size_t offset);
// Uniform offset over every window (or over the tiling phase for short sources).
std::vector<double> random_noise_segment(std::span<const float> noise, std::mt19937_64& rng);

// speech + g * segment with g chosen so the component mean squares have
// ratio 10^(snr_db/10). Silent segments are redrawn up to 10 times.
MixResult mix_at_snr(const features::AudioClip& speech, std::span<const float> noise, double snr_db,
                     std::mt19937_64& rng);

// Apply `condition` (clean returns the clip untouched and ignores `noise`).
features::AudioClip apply_condition(const features::AudioClip& speech, const MixCondition& condition,
                                    std::span<const float> noise, std::mt19937_64& rng);

double snr_db(std::span<const double> speech, std::span<const double> noise);

}  // namespace fcanet::data
