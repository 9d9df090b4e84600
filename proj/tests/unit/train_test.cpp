#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fcanet/common/errors.hpp"
#include "fcanet/data/labels.hpp"
#include "fcanet/model/checkpoint.hpp"
#include "fcanet/model/grad_suite.hpp"
#include "fcanet/train/trainer.hpp"
#include "support/synth.hpp"

using namespace fcanet;
using namespace fcanet::train;
using numerics::Tensor;

namespace {

NamedTensors<double> one_param(std::vector<double> values, std::vector<double> grad) {
  const std::size_t n = values.size();
  Tensor<double> p({n}, std::move(values), true);
  std::copy(grad.begin(), grad.end(), p.mutable_grad().begin());
  return {{"w", p}};
}

void set_grad(NamedTensors<double>& params, const std::vector<double>& grad) {
  auto g = params[0].second.mutable_grad();
  std::copy(grad.begin(), grad.end(), g.begin());
}

// Two synthetic keywords ("yes", "no"), `per_class` clips each.
MemoryExamples two_keywords(std::size_t per_class, std::uint64_t seed) {
  MemoryExamples set;
  const std::size_t labels[2] = {data::build_label("yes"), data::build_label("no")};
  for (std::size_t k = 0; k < 2 * per_class; ++k) {
    const std::size_t cls = k % 2;
    set.add({synth::keyword(cls, seed * 1000 + k), "", ""}, labels[cls], "clip" + std::to_string(k));
  }
  return set;
}

TrainPlan quick_plan() {
  TrainPlan p;
  p.batch_size = 8;
  p.max_epochs = 3;
  p.patience = 2;
  p.seed = 11;
  return p;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  auto params = one_param({1.0, -2.0, 0.5}, {0.3, -7.0, 1e-3});
  OptimState<double> st;
  adam_step(params, st, 0.01);
  const auto w = params[0].second.values();
  EXPECT_NEAR(w[0], 1.0 - 0.01, 1e-8);
  EXPECT_NEAR(w[1], -2.0 + 0.01, 1e-8);
  EXPECT_NEAR(w[2], 0.5 - 0.01, 1e-7);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, SecondStepMatchesHandComputation) {
  auto params = one_param({0.0}, {1.0});
  OptimState<double> st;
  adam_step(params, st, 0.1);
  set_grad(params, {-0.5});
  adam_step(params, st, 0.1);
  const double m = 0.9 * 0.1 + 0.1 * -0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double first = -0.1 * 1.0 / (1.0 + 1e-8);
  const double expected = first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  EXPECT_NEAR(params[0].second.values()[0], expected, 1e-12);
}

TEST(Adam, ZeroGradientLeavesFreshParametersAndDecaysMoments) {
  auto params = one_param({0.25, -0.75}, {0.0, 0.0});
  OptimState<double> st;
  adam_step(params, st, 0.05);
  EXPECT_EQ(params[0].second.values()[0], 0.25);
  EXPECT_EQ(params[0].second.values()[1], -0.75);

  set_grad(params, {2.0, -1.0});
  adam_step(params, st, 0.05);
  const auto m = st.m[0], v = st.v[0];
  set_grad(params, {0.0, 0.0});
  adam_step(params, st, 0.05);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(st.m[0][k], 0.9 * m[k]);
    EXPECT_DOUBLE_EQ(st.v[0][k], 0.999 * v[k]);
  }
}

TEST(Adam, NanGradientNamesTheTensorAndUpdatesNothing) {
  Tensor<double> a({2}, {1.0, 2.0}, true), b({1}, {3.0}, true);
  a.mutable_grad()[0] = 0.5;
  b.mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
  NamedTensors<double> params{{"block0.f.pw", a}, {"head.w", b}};
  OptimState<double> st;
  try {
    adam_step(params, st, 0.01);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("head.w"), std::string::npos);
  }
  EXPECT_EQ(a.values()[0], 1.0);
  EXPECT_EQ(st.step, 0u);
  EXPECT_THROW(adam_step(params, st, 0.0), ArgumentError);
}

TEST(Adam, FiniteInputsStayFinite) {
  auto params = one_param({1.0, 1.0, 1.0}, {1e30, 1e-30, 0.0});
  OptimState<double> st;
  for (int i = 0; i < 50; ++i) adam_step(params, st, 0.5);
  for (double w : params[0].second.values()) EXPECT_TRUE(std::isfinite(w));
}

TEST(Adam, SameSeedGivesBitIdenticalParametersAfterFiveSteps) {
  auto run = [] {
    Net net(model::tiny_config(model::Attention::c2d, model::Placement::all), 5);
    OptimState<float> st;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> xs(4 * 8 * 12);
    for (float& v : xs) v = u(rng);
    const Tensor<float> x({4, 8, 12}, xs);
    for (int s = 0; s < 5; ++s) {
      zero_grads(net.parameters());
      numerics::softmax_cross_entropy(net.forward(x, numerics::BatchNormMode::train), std::vector<std::size_t>{0, 3, 7, 11})
          .backward();
      adam_step(net.parameters(), st, 0.005);
    }
    return model::serialize_checkpoint(net);
  };
  EXPECT_EQ(run(), run());
}

TEST(LearningRate, StepDecayExamples) {
  TrainPlan p;
  EXPECT_DOUBLE_EQ(lr_at(1, p), 0.005);
  EXPECT_DOUBLE_EQ(lr_at(5, p), 0.005);
  EXPECT_DOUBLE_EQ(lr_at(8, p), 0.005);
  EXPECT_DOUBLE_EQ(lr_at(9, p), 0.00425);
  EXPECT_DOUBLE_EQ(lr_at(13, p), 0.005 * 0.85 * 0.85);
  EXPECT_THROW(lr_at(0, p), ArgumentError);
}

TEST(LearningRate, StepDecayTableForFiftyEpochs) {
  // Count completed four-epoch periods after epoch 5 by walking the epochs.
  TrainPlan p;
  double expected = 0.005;
  std::size_t since = 0;
  for (std::size_t e = 1; e <= 50; ++e) {
    if (e > 5 && ++since == 4) {
      expected *= 0.85;
      since = 0;
    }
    EXPECT_NEAR(lr_at(e, p), expected, 1e-15) << "epoch " << e;
    if (e > 1) EXPECT_LE(lr_at(e, p), lr_at(e - 1, p));
  }
}

TEST(LearningRate, CosineWarmRestartsDoublesThePeriod) {
  TrainPlan p;
  p.schedule = ScheduleKind::cosine_warm_restarts;
  EXPECT_DOUBLE_EQ(lr_at(1, p), 0.005);
  EXPECT_NEAR(lr_at(6, p), 0.0025, 1e-15);
  EXPECT_LT(lr_at(10, p), 0.0002);
  EXPECT_DOUBLE_EQ(lr_at(11, p), 0.005);  // restart after 10 epochs
  EXPECT_NEAR(lr_at(21, p), 0.0025, 1e-15);  // middle of the 20-epoch cycle
  EXPECT_DOUBLE_EQ(lr_at(31, p), 0.005);
  for (std::size_t e = 1; e <= 70; ++e) {
    EXPECT_GT(lr_at(e, p), 0.0);
    EXPECT_LE(lr_at(e, p), 0.005);
  }
}

TEST(TrainPlan, KeyValueRoundTripAndValidation) {
  TrainPlan p;
  p.schedule = ScheduleKind::cosine_warm_restarts;
  p.lr0 = 0.0031;
  p.stage_lengths = {3, 4, 5, 6};
  p.val_condition = "-5";
  kv::Writer w;
  TrainPlan::fields(p, w);
  TrainPlan q;
  const auto doc = kv::parse(w.str());
  kv::Reader r(doc);
  TrainPlan::fields(q, r);
  r.reject_unknown();
  EXPECT_EQ(p, q);

  TrainPlan bad;
  bad.patience = bad.max_epochs;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.val_condition = "loud";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(FitLoop, ConstantValidationStopsAfterPatience) {
  TrainPlan p;
  int snapshots = 0;
  const auto fit = fit_loop(
      p, [](std::size_t) { return EpochRecord{.val_acc = 0.5}; },
      [&] { return std::to_string(++snapshots); });
  EXPECT_EQ(fit.best_epoch, 1u);
  EXPECT_EQ(fit.history.size(), 21u);
  EXPECT_EQ(fit.history.back().epoch, 21u);
  EXPECT_TRUE(fit.stopped_early);
  EXPECT_EQ(snapshots, 1);
}

TEST(FitLoop, StopsTwentyEpochsAfterTheLastImprovement) {
  TrainPlan p;
  const auto fit = fit_loop(
      p, [](std::size_t e) { return EpochRecord{.val_acc = e <= 7 ? 0.1 * static_cast<double>(e) : 0.3}; },
      [] { return std::string(); });
  EXPECT_EQ(fit.best_epoch, 7u);
  EXPECT_EQ(fit.history.size(), 27u);
}

TEST(FitLoop, ImprovementsBelowMinDeltaDoNotCount) {
  TrainPlan p;
  const auto fit = fit_loop(
      p, [](std::size_t e) { return EpochRecord{.val_acc = 0.5 + 5e-7 * static_cast<double>(e % 2)}; },
      [] { return std::string(); });
  EXPECT_EQ(fit.best_epoch, 1u);
  EXPECT_EQ(fit.history.size(), 21u);
}

TEST(FitLoop, BestCheckpointIsTheArgmaxOfValidation) {
  TrainPlan p;
  p.max_epochs = 200;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> val(201);
  for (double& v : val) v = u(rng);
  const auto fit = fit_loop(
      p, [&](std::size_t e) { return EpochRecord{.val_acc = val[e]}; },
      [&] { return std::string("snapshot"); });
  std::size_t argmax = 1;
  for (const auto& r : fit.history) {
    EXPECT_GE(fit.best_val_acc, r.val_acc);
    if (r.val_acc > fit.history[argmax - 1].val_acc) argmax = r.epoch;
  }
  EXPECT_EQ(fit.best_epoch, argmax);
  EXPECT_LE(fit.history.size(), 200u);
}

TEST(FitLoop, NeverExceedsMaxEpochs) {
  TrainPlan p;
  p.max_epochs = 30;
  p.patience = 5;
  const auto fit = fit_loop(
      p, [](std::size_t e) { return EpochRecord{.val_acc = static_cast<double>(e)}; }, [] { return std::string(); });
  EXPECT_EQ(fit.history.size(), 30u);
  EXPECT_FALSE(fit.stopped_early);
  EXPECT_EQ(fit.best_epoch, 30u);
}

TEST(History, CsvLayout) {
  std::ostringstream out;
  write_history_csv({{1, 0, 0.005, 2.5, 0.25, 0.5, 1.5}, {2, 1, 0.00425, 1.25, 0.75, 1, 2}}, out);
  EXPECT_EQ(out.str(),
            "epoch,stage,lr,train_loss,train_acc,val_acc,seconds\n"
            "1,0,0.005,2.5,0.25,0.5,1.5\n"
            "2,1,0.00425,1.25,0.75,1,2\n");
}

TEST(Trainer, RejectsEmptyTrainingSetAndMissingNoise) {
  Net net(model::desk_config(), 1);
  MemoryExamples empty;
  Trainer t(net, quick_plan(), {&empty, nullptr, nullptr});
  EXPECT_THROW(t.train_epoch(1, data::CurriculumStage::make(0), 0.005), ConfigError);

  auto set = two_keywords(2, 1);
  Trainer noisy(net, quick_plan(), {&set, nullptr, nullptr});
  EXPECT_THROW(noisy.train_epoch(1, data::CurriculumStage::make(3), 0.005), ConfigError);
}

TEST(Trainer, RejectsFeatureShapeMismatch) {
  Net net(model::tiny_config(model::Attention::c2d, model::Placement::all), 1);
  auto set = two_keywords(1, 1);
  EXPECT_THROW(Trainer(net, quick_plan(), {&set, nullptr, nullptr}), ConfigError);
}

TEST(Trainer, IdenticalSeedsGiveIdenticalEpochs) {
  auto set = two_keywords(6, 2);
  data::NoiseBank noise;
  noise.names = {"hum"};
  noise.clips.push_back({});
  for (double v : synth::random_clip(9, 24000)) noise.clips[0].push_back(static_cast<float>(v));
  auto run = [&](std::size_t workers) {
    Net net(model::desk_config(), 3);
    Trainer t(net, quick_plan(), {&set, nullptr, &noise}, {}, workers);
    const auto m = t.train_epoch(1, data::CurriculumStage::make(3), 0.005);
    return std::make_tuple(m.loss, m.accuracy, model::serialize_checkpoint(net));
  };
  const auto a = run(1), b = run(1), c = run(4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Trainer, FirstEpochLowersTheLoss) {
  auto set = two_keywords(8, 3);
  Net net(model::desk_config(), 4);
  const auto probe_loss = [&] {
    features::MfccExtractor mfcc;
    std::vector<float> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto f = clip_features(mfcc, set.load(i));
      xs.insert(xs.end(), f.begin(), f.end());
      ys.push_back(set.label(i));
    }
    numerics::NoGradGuard g;
    return numerics::softmax_cross_entropy(
               net.forward(Tensor<float>({set.size(), 40, 101}, xs), numerics::BatchNormMode::train), ys)
        .item();
  };
  const double before = probe_loss();
  EXPECT_NEAR(before, std::log(12.0), 0.3);
  TrainPlan p = quick_plan();
  p.mixup_alpha = 0.0;
  Trainer t(net, p, {&set, nullptr, nullptr});
  const auto m = t.train_epoch(1, data::CurriculumStage::make(0), 0.005);
  EXPECT_TRUE(std::isfinite(m.loss));
  EXPECT_LT(probe_loss(), before);
}
