#include "fcanet/data/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fcanet/common/errors.hpp"
#include "fcanet/common/seed.hpp"
#include "fcanet/data/labels.hpp"
#include "fcanet/features/audio.hpp"

namespace fs = std::filesystem;

namespace fcanet::data {

namespace {

std::set<std::string> read_list(const fs::path& file) {
  std::set<std::string> out;
  std::ifstream in(file);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<fs::path> sorted_wavs(const fs::path& dir, bool recursive) {
  std::vector<fs::path> out;
  auto take = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) take(e);
  } else {
    for (const auto& e : fs::directory_iterator(dir)) take(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split '" + std::string(name) + "'");
}

std::string source_id_of(std::string_view path) {
  const std::string stem = fs::path(path).stem().string();
  const std::size_t cut = stem.find("_nohash_");
  return cut == std::string::npos ? stem : stem.substr(0, cut);
}

Manifest discover_manifest(const CorpusPaths& paths) {
  if (!fs::is_directory(paths.speech_root)) throw ConfigError("speech root not found: " + paths.speech_root.string());
  if (!fs::is_directory(paths.noise_root)) throw ConfigError("noise root not found: " + paths.noise_root.string());

  const auto val_list = read_list(paths.speech_root / "validation_list.txt");
  const auto test_list = read_list(paths.speech_root / "testing_list.txt");
  const bool official = !val_list.empty() || !test_list.empty();

  std::vector<fs::path> word_dirs;
  for (const auto& e : fs::directory_iterator(paths.speech_root)) {
    if (e.is_directory() && e.path().filename().string().front() != '_') word_dirs.push_back(e.path());
  }
  std::sort(word_dirs.begin(), word_dirs.end());

  Manifest m;
  for (const auto& dir : word_dirs) {
    const std::string word = dir.filename().string();
    if (!in_vocabulary(word)) throw DataError("directory '" + word + "' is not a vocabulary word");
    for (const auto& file : sorted_wavs(dir, false)) {
      const std::string rel = word + "/" + file.filename().string();
      Split split = Split::train;
      if (official) {
        if (val_list.count(rel)) split = Split::val;
        if (test_list.count(rel)) split = Split::test;
      } else {
        const std::uint64_t bucket = derive_seed(0, "split:" + source_id_of(rel)) % 100;
        split = bucket < 10 ? Split::val : bucket < 20 ? Split::test : Split::train;
      }
      m.entries.push_back({rel, word, split});
    }
  }

  for (const auto& file : sorted_wavs(paths.noise_root, true)) {
    const auto samples = features::read_wav(file);
    m.noise.push_back({fs::relative(file, paths.noise_root).generic_string(),
                       static_cast<double>(samples.size()) / features::kSampleRate});
  }
  return m;
}

void validate_manifest(const Manifest& manifest, const CorpusPaths& paths) {
  std::map<std::string, Split> owner;
  for (const auto& e : manifest.entries) {
    build_label(e.word);
    const std::string src = source_id_of(e.path);
    auto [it, fresh] = owner.emplace(src, e.split);
    if (!fresh && it->second != e.split) {
      throw DataError("source '" + src + "' appears in both " + std::string(split_name(it->second)) + " and " +
                      std::string(split_name(e.split)));
    }
    if (!fs::is_regular_file(paths.speech_root / e.path)) throw DataError("missing speech file " + e.path);
  }
  for (const auto& n : manifest.noise) {
    if (!fs::is_regular_file(paths.noise_root / n.path)) throw DataError("missing noise file " + n.path);
  }
}

void write_manifest(const Manifest& manifest, const fs::path& speech_tsv, const fs::path& noise_tsv) {
  std::ofstream s(speech_tsv, std::ios::binary);
  std::ofstream n(noise_tsv, std::ios::binary);
  if (!s || !n) throw ConfigError("cannot write manifest files");
  for (const auto& e : manifest.entries) s << e.path << '\t' << e.word << '\t' << split_name(e.split) << '\n';
  for (const auto& e : manifest.noise) n << e.path << '\t' << format_double(e.duration_s) << '\n';
}

Manifest read_manifest(const fs::path& speech_tsv, const fs::path& noise_tsv) {
  auto lines = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read manifest " + p.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
    return out;
  };
  Manifest m;
  for (const auto& line : lines(speech_tsv)) {
    const auto f = split_tabs(line);
    if (f.size() != 3) throw DataError("manifest line needs 3 fields: " + line);
    m.entries.push_back({f[0], f[1], parse_split(f[2])});
  }
  for (const auto& line : lines(noise_tsv)) {
    const auto f = split_tabs(line);
    double d = 0.0;
    if (f.size() != 2 || std::from_chars(f[1].data(), f[1].data() + f[1].size(), d).ec != std::errc{}) {
      throw DataError("noise manifest line needs path and duration: " + line);
    }
    m.noise.push_back({f[0], d});
  }
  return m;
}

std::size_t count_split(const Manifest& manifest, Split split) {
  return static_cast<std::size_t>(std::count_if(manifest.entries.begin(), manifest.entries.end(),
                                                [&](const ManifestEntry& e) { return e.split == split; }));
}

}  // namespace fcanet::data
