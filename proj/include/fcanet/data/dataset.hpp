#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcanet/data/manifest.hpp"
#include "fcanet/data/mixing.hpp"
#include "fcanet/features/audio.hpp"

namespace fcanet::data {

// Every noise file of a manifest, resident in memory.
struct NoiseBank {
  std::vector<std::string> names;
  std::vector<std::vector<float>> clips;

  bool empty() const { return clips.empty(); }
  static NoiseBank load(const Manifest& manifest, const CorpusPaths& paths);
};

struct ClipRef {
  std::string clip_id;  // manifest path, or "_silence_/<split>/<k>"
  std::size_t label = 0;
  bool silence = false;
  std::size_t entry = 0;  // manifest index for speech clips
};

// One split of the corpus, loaded lazily. Silence clips are synthesized from
// the noise bank: round(silence_fraction * speech clips) of them, each a noise
// segment scaled to the median power of the split's speech.
class ClipSource {
 public:
  ClipSource(const Manifest& manifest, Split split, CorpusPaths paths, const NoiseBank& noise,
             std::uint64_t seed, double silence_fraction);

  std::size_t size() const { return refs_.size(); }
  const ClipRef& ref(std::size_t i) const { return refs_.at(i); }
  // Padded to one second.
  features::AudioClip load(std::size_t i) const;
  double silence_power() const { return silence_power_; }

 private:
  const Manifest* manifest_;
  CorpusPaths paths_;
  const NoiseBank* noise_;
  std::uint64_t seed_;
  Split split_;
  std::vector<ClipRef> refs_;
  double silence_power_ = 0.0;
};

// A noise segment scaled to mean square `target_power`, drawn from (seed, clip id).
features::AudioClip silence_clip(const NoiseBank& noise, double target_power, std::uint64_t seed,
                                 std::string_view clip_id);

struct EvalSet {
  MixCondition condition;
  std::vector<std::string> clip_ids;
  std::vector<std::size_t> labels;
  std::vector<std::vector<float>> audio;
  friend bool operator==(const EvalSet&, const EvalSet&) = default;
};

// Noise file and offset for (clip id, condition) come only from the seed.
MixResult eval_mix(const features::AudioClip& clip, std::string_view clip_id, const MixCondition& condition,
                   const NoiseBank& noise, std::uint64_t seed);
EvalSet build_eval_set(const ClipSource& test, const NoiseBank& noise, const MixCondition& condition,
                       std::uint64_t seed);
// Clean, 20, 0, -5, -10 dB. Throws ConfigError without noise.
std::array<EvalSet, 5> build_eval_sets(const ClipSource& test, const NoiseBank& noise, std::uint64_t seed);

void write_eval_set(const EvalSet& set, const std::filesystem::path& path);
EvalSet read_eval_set(const std::filesystem::path& path);
std::string eval_set_file_name(const MixCondition& condition);

std::string sha256_hex(const std::filesystem::path& file);

}  // namespace fcanet::data
