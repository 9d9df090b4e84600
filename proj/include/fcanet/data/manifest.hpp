#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fcanet::data {

enum class Split { train, val, test };
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::string path;  // relative to the speech root
  std::string word;
  Split split = Split::train;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct NoiseEntry {
  std::string path;  // relative to the noise root
  double duration_s = 0.0;
  friend bool operator==(const NoiseEntry&, const NoiseEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<NoiseEntry> noise;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct CorpusPaths {
  std::filesystem::path speech_root;
  std::filesystem::path noise_root;
};

// Speaker part of a Speech Commands file name ("abc123_nohash_0.wav" -> "abc123").
std::string source_id_of(std::string_view path);

// Walks <speech_root>/<word>/*.wav for vocabulary words (directories starting
// with '_' are skipped) and every .wav under noise_root. Splits come from
// validation_list.txt / testing_list.txt when present, else from a stable
// hash of the source id (10% val, 10% test). Throws ConfigError on missing roots.
Manifest discover_manifest(const CorpusPaths& paths);

// Disjoint splits by source id, known words, and every referenced file present.
void validate_manifest(const Manifest& manifest, const CorpusPaths& paths);

// Two TSV files: "path<TAB>word<TAB>split" and "path<TAB>duration_s".
void write_manifest(const Manifest& manifest, const std::filesystem::path& speech_tsv,
                    const std::filesystem::path& noise_tsv);
Manifest read_manifest(const std::filesystem::path& speech_tsv, const std::filesystem::path& noise_tsv);

std::size_t count_split(const Manifest& manifest, Split split);

}  // namespace fcanet::data
