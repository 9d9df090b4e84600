#include "fcanet/cli/run_config.hpp"

#include "fcanet/common/errors.hpp"
#include "fcanet/common/parallel.hpp"

namespace fcanet::cli {

void RunConfig::validate() const {
  if (name.empty() || name.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("name must be nonempty and free of commas, quotes and newlines");
  }
  if (!(silence_fraction >= 0.0 && silence_fraction <= 1.0)) throw ConfigError("data.silence_fraction must be in [0, 1]");
  model.validate();
  train.validate();
  mfcc.validate();
  const std::size_t frames = mfcc.n_frames(features::kClipSamples);
  if (model.input_bins != mfcc.n_mfcc || model.input_frames != frames) {
    throw ConfigError("model input " + std::to_string(model.input_bins) + "x" + std::to_string(model.input_frames) +
                      " does not match MFCC output " + std::to_string(mfcc.n_mfcc) + "x" + std::to_string(frames));
  }
}

std::size_t RunConfig::worker_count() const { return workers == 0 ? default_workers() : workers; }

train::TrainPlan RunConfig::plan() const {
  train::TrainPlan p = train;
  p.seed = seed;
  return p;
}

std::string RunConfig::to_kv() const {
  kv::Writer w;
  fields(*this, w);
  return w.str();
}

RunConfig RunConfig::from_kv(std::string_view text) {
  const auto doc = kv::parse(text);
  RunConfig cfg;
  kv::Reader r(doc);
  fields(cfg, r);
  r.reject_unknown();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  const auto doc = kv::parse_file(path);
  RunConfig cfg;
  kv::Reader r(doc);
  fields(cfg, r);
  r.reject_unknown();
  return cfg;
}

}  // namespace fcanet::cli
