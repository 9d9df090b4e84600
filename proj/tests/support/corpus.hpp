#pragma once

// Writes a tiny Speech Commands style corpus plus a noise corpus to disk.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fcanet/features/audio.hpp"
#include "support/synth.hpp"

namespace corpus {

struct Layout {
  std::vector<std::string> words = {"yes", "no", "bird"};
  std::size_t speakers = 6;          // clips per word, one per speaker
  std::vector<std::size_t> noise_lengths = {40000, 24000, 9000};  // the last is shorter than a second
  bool official_lists = true;        // speakers 0..3 train, 4 val, 5 test
};

inline std::string speaker(std::size_t s) { return "spk" + std::to_string(s); }

inline void write(const std::filesystem::path& root, const Layout& layout = {}) {
  namespace fs = std::filesystem;
  fs::remove_all(root);
  const fs::path speech = root / "speech", noise = root / "noise";
  fs::create_directories(speech / "_background_noise_");
  fs::create_directories(noise / "sub");
  std::string val, test;
  for (std::size_t w = 0; w < layout.words.size(); ++w) {
    fs::create_directories(speech / layout.words[w]);
    for (std::size_t s = 0; s < layout.speakers; ++s) {
      const std::string rel = layout.words[w] + "/" + speaker(s) + "_nohash_0.wav";
      fcanet::features::write_wav(speech / rel, synth::keyword(w, 1000 * w + s));
      if (s + 2 == layout.speakers) val += rel + "\n";
      if (s + 1 == layout.speakers) test += rel + "\n";
    }
  }
  if (layout.official_lists) {
    std::ofstream(speech / "validation_list.txt") << val;
    std::ofstream(speech / "testing_list.txt") << test;
  }
  for (std::size_t k = 0; k < layout.noise_lengths.size(); ++k) {
    const fs::path p = k == 0 ? noise / "sub" / "n0.wav" : noise / ("n" + std::to_string(k) + ".wav");
    fcanet::features::write_wav(p, synth::random_clip(500 + k, layout.noise_lengths[k], 0.2));
  }
}

}  // namespace corpus
