#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "fcanet/features/mfcc.hpp"
#include "fcanet/model/config.hpp"
#include "fcanet/train/plan.hpp"

namespace fcanet::cli {

// Every knob of a run as one flat key=value document. Section keys carry a
// prefix: "model.blocks", "train.lr0", "mfcc.n_fft", "data.speech_root".
struct RunConfig {
  std::string name = "fcanet";
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = one per hardware thread; never changes results
  std::string speech_root;
  std::string noise_root;
  double silence_fraction = 0.1;
  model::ModelConfig model;
  train::TrainPlan train;
  features::MfccParams mfcc;

  // Throws ConfigError.
  void validate() const;
  std::size_t worker_count() const;
  // The train plan with the run seed filled in.
  train::TrainPlan plan() const;

  template <class Self, class V>
  static void fields(Self& c, V&& v) {
    v("name", c.name);
    v("seed", c.seed);
    v("workers", c.workers);
    v("data.speech_root", c.speech_root);
    v("data.noise_root", c.noise_root);
    v("data.silence_fraction", c.silence_fraction);
    auto section = [&v](std::string prefix) {
      return [&v, prefix](std::string_view key, auto& field) { v(prefix + std::string(key), field); };
    };
    std::decay_t<decltype(c.model)>::fields(c.model, section("model."));
    std::decay_t<decltype(c.train)>::fields(c.train, section("train."));
    auto m = section("mfcc.");
    m("n_mfcc", c.mfcc.n_mfcc);
    m("n_fft", c.mfcc.n_fft);
    m("hop_length", c.mfcc.hop_length);
    m("n_mels", c.mfcc.n_mels);
    m("f_min", c.mfcc.f_min);
    m("f_max", c.mfcc.f_max);
  }

  std::string to_kv() const;
  // Unknown keys are rejected naming the key; missing keys keep defaults.
  static RunConfig from_kv(std::string_view text);
  static RunConfig from_file(const std::string& path);

  friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.to_kv() == b.to_kv(); }
};

}  // namespace fcanet::cli
