#include "fcanet/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "fcanet/common/errors.hpp"
#include "fcanet/common/seed.hpp"
#include "fcanet/data/labels.hpp"
#include "fcanet/data/mixup.hpp"
#include "fcanet/model/checkpoint.hpp"

namespace fcanet::train {

using numerics::BatchNormMode;

void MemoryExamples::add(features::AudioClip clip, std::size_t label, std::string clip_id) {
  if (label >= data::kNumClasses) throw ArgumentError("label out of range: " + std::to_string(label));
  clips_.push_back(features::pad_or_trim(clip));
  labels_.push_back(label);
  ids_.push_back(std::move(clip_id));
}

FitResult fit_loop(const TrainPlan& plan, const std::function<EpochRecord(std::size_t)>& run_epoch,
                   const std::function<std::string()>& snapshot,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
  plan.validate();
  FitResult fit;
  for (std::size_t epoch = 1; epoch <= plan.max_epochs; ++epoch) {
    EpochRecord rec = run_epoch(epoch);
    rec.epoch = epoch;
    fit.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (fit.best_epoch == 0 || rec.val_acc > fit.best_val_acc + plan.min_delta) {
      fit.best_epoch = epoch;
      fit.best_val_acc = rec.val_acc;
      fit.best_checkpoint = snapshot();
    } else if (epoch - fit.best_epoch >= plan.patience) {
      fit.stopped_early = epoch < plan.max_epochs;
      break;
    }
  }
  return fit;
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,stage,lr,train_loss,train_acc,val_acc,seconds\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.stage << ',' << kv::format(r.lr) << ',' << kv::format(r.train_loss) << ','
        << kv::format(r.train_acc) << ',' << kv::format(r.val_acc) << ',' << kv::format(r.seconds) << '\n';
  }
}

std::vector<float> clip_features(const features::MfccExtractor& mfcc, const features::AudioClip& clip) {
  const auto map = mfcc(clip);
  return {map.values.begin(), map.values.end()};
}

std::vector<std::size_t> predict(Net& net, const std::vector<std::vector<float>>& features, std::size_t batch_size) {
  const auto& cfg = net.config();
  const std::size_t width = cfg.input_bins * cfg.input_frames;
  std::vector<std::size_t> out;
  out.reserve(features.size());
  numerics::NoGradGuard no_grad;
  for (std::size_t start = 0; start < features.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, features.size() - start);
    std::vector<float> buf;
    buf.reserve(n * width);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = features[start + i];
      if (f.size() != width) throw ShapeError("feature map has " + std::to_string(f.size()) + " values, expected " +
                                              std::to_string(width));
      buf.insert(buf.end(), f.begin(), f.end());
    }
    const auto logits = net.forward(numerics::Tensor<float>({n, cfg.input_bins, cfg.input_frames}, std::move(buf)),
                                    BatchNormMode::eval);
    const auto v = logits.values();
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = v.subspan(i * cfg.classes, cfg.classes);
      out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

Trainer::Trainer(Net& net, TrainPlan plan, TrainData data, features::MfccParams mfcc, std::size_t workers)
    : net_(net), plan_(std::move(plan)), data_(data), mfcc_(mfcc), workers_(std::max<std::size_t>(1, workers)) {
  plan_.validate();
  const auto& cfg = net_.config();
  if (cfg.input_bins != mfcc.n_mfcc || cfg.input_frames != mfcc.n_frames(features::kClipSamples)) {
    throw ConfigError("network input " + std::to_string(cfg.input_bins) + "x" + std::to_string(cfg.input_frames) +
                      " does not match the MFCC output " + std::to_string(mfcc.n_mfcc) + "x" +
                      std::to_string(mfcc.n_frames(features::kClipSamples)));
  }
  if (cfg.classes != data::kNumClasses) {
    throw ConfigError("training needs " + std::to_string(data::kNumClasses) + " output classes");
  }
}

std::vector<float> Trainer::example_features(const features::AudioClip& clip, const data::MixCondition& condition,
                                             std::mt19937_64& rng) const {
  features::AudioClip mixed = clip;
  if (!condition.is_clean()) {
    if (!data_.noise || data_.noise->empty()) throw ConfigError("curriculum stage " + condition.name() + " dB needs a noise corpus");
    const auto& bank = data_.noise->clips;
    const auto& src = bank[std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng)];
    mixed = data::apply_condition(clip, condition, src, rng);
  }
  const double shift = std::uniform_real_distribution<double>(-plan_.max_shift_ms, plan_.max_shift_ms)(rng);
  const auto masked = features::spec_mask(mfcc_(features::time_shift(mixed, shift)), rng, plan_.max_mask_width);
  return {masked.values.begin(), masked.values.end()};
}

EpochMetrics Trainer::train_epoch(std::size_t epoch, const data::CurriculumStage& stage, double lr) {
  const ExampleSet* set = data_.train;
  if (!set || set->size() == 0) throw ConfigError("training set is empty");
  const auto& cfg = net_.config();
  const std::size_t n = set->size(), width = cfg.input_bins * cfg.input_frames;
  const std::string tag = std::to_string(epoch);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(plan_.seed, "shuffle:" + tag));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const auto& params = net_.parameters();
  double loss_sum = 0.0;
  for (std::size_t start = 0, b = 0; start < n; start += plan_.batch_size, ++b) {
    const std::size_t m = std::min(plan_.batch_size, n - start);
    data::Batch batch{m, width, cfg.classes, std::vector<double>(m * width), std::vector<double>(m * cfg.classes, 0.0)};
    parallel_for(
        m,
        [&](std::size_t i) {
          const std::size_t idx = order[start + i];
          std::mt19937_64 rng(derive_seed(plan_.seed, "item:" + tag, start + i));
          const auto condition = data::curriculum_condition(stage, rng);
          const auto feat = example_features(set->load(idx), condition, rng);
          std::copy(feat.begin(), feat.end(), batch.features.begin() + static_cast<std::ptrdiff_t>(i * width));
          batch.label_weights[i * cfg.classes + set->label(idx)] = 1.0;
        },
        workers_);
    if (plan_.mixup_alpha > 0.0) {
      std::mt19937_64 mix_rng(derive_seed(plan_.seed, "mixup:" + tag, b));
      batch = data::mixup(batch, plan_.mixup_alpha, mix_rng);
    }

    numerics::Tensor<float> x({m, cfg.input_bins, cfg.input_frames},
                              std::vector<float>(batch.features.begin(), batch.features.end()));
    numerics::Tensor<float> w({m, cfg.classes}, std::vector<float>(batch.label_weights.begin(), batch.label_weights.end()));
    zero_grads(params);
    const auto loss = numerics::softmax_cross_entropy(net_.forward(x, BatchNormMode::train), w);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("non-finite training loss in epoch " + tag + ", batch " + std::to_string(b));
    loss.backward();
    adam_step(params, opt_, lr);
    loss_sum += value * static_cast<double>(m);
  }
  return {loss_sum / static_cast<double>(n), evaluate(*set, data::MixCondition::clean())};
}

double Trainer::evaluate(const ExampleSet& set, const data::MixCondition& condition) {
  if (set.size() == 0) throw ConfigError("cannot evaluate on an empty set");
  std::vector<std::vector<float>> feats(set.size());
  static const data::NoiseBank kNoNoise;
  const data::NoiseBank& noise = data_.noise ? *data_.noise : kNoNoise;
  parallel_for(
      set.size(),
      [&](std::size_t i) {
        feats[i] = clip_features(mfcc_, data::eval_mix(set.load(i), set.clip_id(i), condition, noise, plan_.seed).mixed);
      },
      workers_);
  const auto pred = predict(net_, feats, plan_.batch_size);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.label(i);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

FitResult Trainer::fit(const std::function<void(const EpochRecord&)>& on_epoch) {
  if (!data_.val || data_.val->size() == 0) throw ConfigError("validation split is empty");
  const auto val_condition = data::parse_condition(plan_.val_condition);
  auto run_epoch = [&](std::size_t epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto stage = data::stage_schedule(epoch - 1, plan_.stage_lengths);
    EpochRecord rec;
    rec.stage = stage.index;
    rec.lr = lr_at(epoch, plan_);
    const auto metrics = train_epoch(epoch, stage, rec.lr);
    rec.train_loss = metrics.loss;
    rec.train_acc = metrics.accuracy;
    rec.val_acc = evaluate(*data_.val, val_condition);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  };
  return fit_loop(plan_, run_epoch, [&] { return model::serialize_checkpoint(net_); }, on_epoch);
}

}  // namespace fcanet::train
