#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fcanet/common/parallel.hpp"
#include "fcanet/data/curriculum.hpp"
#include "fcanet/data/dataset.hpp"
#include "fcanet/features/mfcc.hpp"
#include "fcanet/model/network.hpp"
#include "fcanet/train/adam.hpp"
#include "fcanet/train/plan.hpp"

namespace fcanet::train {

using Net = model::Network<float>;

// Labelled one-second clips.
class ExampleSet {
 public:
  virtual ~ExampleSet() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
  virtual std::string clip_id(std::size_t i) const = 0;
  virtual features::AudioClip load(std::size_t i) const = 0;
};

class SplitExamples : public ExampleSet {
 public:
  explicit SplitExamples(const data::ClipSource& source) : source_(&source) {}
  std::size_t size() const override { return source_->size(); }
  std::size_t label(std::size_t i) const override { return source_->ref(i).label; }
  std::string clip_id(std::size_t i) const override { return source_->ref(i).clip_id; }
  features::AudioClip load(std::size_t i) const override { return source_->load(i); }

 private:
  const data::ClipSource* source_;
};

class MemoryExamples : public ExampleSet {
 public:
  void add(features::AudioClip clip, std::size_t label, std::string clip_id);
  std::size_t size() const override { return clips_.size(); }
  std::size_t label(std::size_t i) const override { return labels_.at(i); }
  std::string clip_id(std::size_t i) const override { return ids_.at(i); }
  features::AudioClip load(std::size_t i) const override { return clips_.at(i); }

 private:
  std::vector<features::AudioClip> clips_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> ids_;
};

struct TrainData {
  const ExampleSet* train = nullptr;
  const ExampleSet* val = nullptr;  // may be null for train_epoch alone
  const data::NoiseBank* noise = nullptr;
};

struct EpochMetrics {
  double loss = 0.0;      // mean over examples of the augmented, mixed-label loss
  double accuracy = 0.0;  // eval-mode top-1 on clean, unaugmented training clips
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t stage = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct FitResult {
  std::string best_checkpoint;  // serialized network at the best epoch
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

// Early-stopping driver. run_epoch(epoch) trains one epoch and reports it;
// snapshot() is called whenever validation accuracy beats the best so far by
// more than plan.min_delta. Stops after plan.patience epochs without such an
// improvement, or at plan.max_epochs.
FitResult fit_loop(const TrainPlan& plan, const std::function<EpochRecord(std::size_t)>& run_epoch,
                   const std::function<std::string()>& snapshot,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

// "epoch,stage,lr,train_loss,train_acc,val_acc,seconds" plus one row per epoch.
void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

// Features of one clip as the network sees them: [bins x frames] floats.
std::vector<float> clip_features(const features::MfccExtractor& mfcc, const features::AudioClip& clip);

// Eval-mode top-1 predictions; `features` holds bins*frames floats per clip.
std::vector<std::size_t> predict(Net& net, const std::vector<std::vector<float>>& features, std::size_t batch_size);

class Trainer {
 public:
  Trainer(Net& net, TrainPlan plan, TrainData data, features::MfccParams mfcc = {},
          std::size_t workers = default_workers());

  const TrainPlan& plan() const { return plan_; }
  OptimState<float>& optimizer() { return opt_; }

  // One pass over shuffled training batches: curriculum mixing, MFCC, time
  // shift, spectrogram masking, mixup, then forward/backward/Adam. Throws
  // ConfigError on an empty training set, NumericError on a non-finite loss
  // or gradient.
  EpochMetrics train_epoch(std::size_t epoch, const data::CurriculumStage& stage, double lr);

  // Eval-mode top-1 accuracy. Noisy conditions mix each clip once from
  // (plan seed, condition, clip id).
  double evaluate(const ExampleSet& set, const data::MixCondition& condition);

  // Curriculum schedule, learning-rate schedule and early stopping on
  // validation accuracy under plan.val_condition.
  FitResult fit(const std::function<void(const EpochRecord&)>& on_epoch = {});

 private:
  std::vector<float> example_features(const features::AudioClip& clip, const data::MixCondition& condition,
                                      std::mt19937_64& rng) const;

  Net& net_;
  TrainPlan plan_;
  TrainData data_;
  features::MfccExtractor mfcc_;
  std::size_t workers_;
  OptimState<float> opt_;
};

}  // namespace fcanet::train
