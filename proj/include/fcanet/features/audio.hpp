#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fcanet::features {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 16000;

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  std::string label;            // raw word, or the silence marker
  std::string source_id;
};

// Right zero-pad or truncate to exactly one second.
AudioClip pad_or_trim(const AudioClip& clip);

// Shift by round(shift_ms * 16) samples; positive delays the content.
// The vacated region is zero-filled.
AudioClip time_shift(const AudioClip& clip, double shift_ms);

// Mono 16-bit PCM at 16 kHz only. Throws DataError otherwise.
std::vector<double> read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const double> samples);

double mean_square(std::span<const double> samples);

}  // namespace fcanet::features
