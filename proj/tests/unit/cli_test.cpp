#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fcanet/cli/commands.hpp"
#include "fcanet/common/errors.hpp"
#include "fcanet/data/labels.hpp"
#include "fcanet/model/checkpoint.hpp"
#include "fcanet/train/trainer.hpp"
#include "support/corpus.hpp"

using namespace fcanet;
using namespace fcanet::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome fcanet_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return model::read_file_bytes(p); }

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

// A tiny corpus and a config for a desk-sized network, one directory per test so ctest can run them in parallel.
class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            (std::string("fcanet_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    corpus::write(root_);
    std::ofstream(config()) << "data.speech_root = " << (root_ / "speech").string() << "\n"
                            << "data.noise_root = " << (root_ / "noise").string() << "\n"
                            << "model.blocks = 2\nmodel.block_channels = 4\nmodel.stem_channels = 4\n"
                            << "model.kernel_f = 3\nmodel.kernel_t = 3\nmodel.kernel_t1 = 5\n"
                            << "train.batch_size = 8\ntrain.max_epochs = 3\ntrain.patience = 2\n"
                            << "train.stage_lengths = 1,1,1,1\n";
  }
  static fs::path config() { return root_ / "run.cfg"; }
  static fs::path work(const std::string& name) { return root_ / name; }
  static Outcome prepare(const std::string& dir) {
    return fcanet_cli({"prepare", "--config", config().string(), "--out", work(dir).string()});
  }
  static inline fs::path root_;
};

}  // namespace

TEST(RunConfig, RoundTripIsIdentity) {
  RunConfig c;
  c.name = "probe";
  c.seed = 42;
  c.speech_root = "/data/sc";
  c.model.attention = model::Attention::eca;
  c.model.placement = model::Placement::final;
  c.model.mix_expansion = 0.7;
  c.train.schedule = train::ScheduleKind::cosine_warm_restarts;
  c.train.lr0 = 1.0 / 3.0;
  c.mfcc.f_min = 25.5;
  const auto text = c.to_kv();
  EXPECT_EQ(RunConfig::from_kv(text), c);
  EXPECT_EQ(RunConfig::from_kv(text).to_kv(), text);
  EXPECT_NE(text.find("model.attention=eca\n"), std::string::npos);
  EXPECT_NE(text.find("train.lr0=0.3333333333333333\n"), std::string::npos);
}

TEST(RunConfig, RejectsUnknownKeysByName) {
  try {
    RunConfig::from_kv("seed = 3\n# comment\nmodel.blokcs = 4\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model.blokcs"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(RunConfig::from_kv("train.seed = 1\n"), ConfigError);
}

TEST(RunConfig, ValidatesMfccAgainstModelInput) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.mfcc.n_mfcc = 30;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(fcanet_cli({}).code, kBadInput);
  EXPECT_EQ(fcanet_cli({"frobnicate"}).code, kBadInput);
  EXPECT_EQ(fcanet_cli({"train"}).code, kBadInput);  // --out is required
  EXPECT_EQ(fcanet_cli({"count", "--seed", "minus-one"}).code, kBadInput);
  EXPECT_EQ(fcanet_cli({"count", "--config", "/nonexistent/run.cfg"}).code, kBadInput);
  EXPECT_EQ(fcanet_cli({"--help"}).code, kOk);
}

TEST(Cli, UnknownConfigKeyExitsTwoNamingIt) {
  const auto p = fs::temp_directory_path() / "fcanet_bad_key.cfg";
  std::ofstream(p) << "train.lr0 = 0.01\ntrain.learning_rate = 0.01\n";
  for (const char* cmd : {"count", "train", "prepare", "eval", "gradcheck"}) {
    const auto r = fcanet_cli({cmd, "--config", p.string(), "--out", (fs::temp_directory_path() / "fcanet_unused").string()});
    EXPECT_EQ(r.code, kBadInput) << cmd;
    EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos) << r.err;
  }
}

TEST(Count, DefaultFootprintNearPublishedNumbers) {
  const auto dir = fs::temp_directory_path() / "fcanet_count_test";
  const auto r = fcanet_cli({"count", "--all", "--out", dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::ifstream in(dir / kFootprint);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "model,variant,attention,params,macs");
  std::size_t rows = 0, base_macs = 0, c2d_all_params = 0, c2d_all_macs = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string name, variant, attention, params, macs;
    std::getline(ss, name, ',');
    std::getline(ss, variant, ',');
    std::getline(ss, attention, ',');
    std::getline(ss, params, ',');
    std::getline(ss, macs, ',');
    if (attention == "none") base_macs = std::stoul(macs);
    if (attention == "c2d" && variant == "all") {
      c2d_all_params = std::stoul(params);
      c2d_all_macs = std::stoul(macs);
    }
  }
  EXPECT_EQ(rows, 13u);
  EXPECT_NEAR(c2d_all_params / 119e3, 1.0, 0.10);
  EXPECT_NEAR(c2d_all_macs / 22.3e6, 1.0, 0.10);
  EXPECT_LE(static_cast<double>(c2d_all_macs - base_macs), 0.01 * static_cast<double>(c2d_all_macs));
}

TEST(Count, DoublingBlocksIncreasesBothCounts) {
  RunConfig c;
  const auto one = model::count_footprint(c.model);
  c.model.blocks *= 2;
  const auto two = model::count_footprint(c.model);
  EXPECT_GT(two.params, one.params);
  EXPECT_GT(two.macs, one.macs);
  std::ostringstream log;
  cmd_count(c, {}, false, true, log);
  EXPECT_NE(log.str().find("block9.mix_t"), std::string::npos);
}

TEST_F(CliRun, PrepareIsReproducibleAndCountsEveryFile) {
  const auto a = prepare("prep_a"), b = prepare("prep_b");
  ASSERT_EQ(a.code, kOk) << a.err;
  ASSERT_EQ(b.code, kOk) << b.err;
  EXPECT_EQ(slurp(work("prep_a") / "eval_digests.txt"), slurp(work("prep_b") / "eval_digests.txt"));
  EXPECT_EQ(count_lines(work("prep_a") / "eval_digests.txt"), 5u);
  // 3 words x 6 speakers and 3 noise files.
  EXPECT_EQ(count_lines(work("prep_a") / kSpeechManifest), 18u);
  EXPECT_EQ(count_lines(work("prep_a") / kNoiseManifest), 3u);

  const auto other = fcanet_cli({"prepare", "--config", config().string(), "--seed", "9", "--out",
                                 work("prep_c").string()});
  ASSERT_EQ(other.code, kOk);
  EXPECT_NE(slurp(work("prep_a") / "eval_digests.txt"), slurp(work("prep_c") / "eval_digests.txt"));
}

TEST_F(CliRun, PrepareWithoutNoiseDirectoryExitsTwo) {
  const auto cfg = work("no_noise.cfg");
  std::ofstream(cfg) << "data.speech_root = " << (root_ / "speech").string() << "\n"
                     << "data.noise_root = " << (root_ / "missing").string() << "\n";
  const auto r = fcanet_cli({"prepare", "--config", cfg.string(), "--out", work("prep_missing").string()});
  EXPECT_EQ(r.code, kBadInput);
  EXPECT_NE(r.err.find("missing"), std::string::npos) << r.err;
}

TEST_F(CliRun, TrainWritesArtifactsAndEvalIsStable) {
  ASSERT_EQ(prepare("run").code, kOk);
  const auto dir = work("run").string();
  const auto t = fcanet_cli({"train", "--config", config().string(), "--out", dir});
  ASSERT_EQ(t.code, kOk) << t.err;
  EXPECT_TRUE(fs::exists(work("run") / kCheckpoint));
  EXPECT_EQ(count_lines(work("run") / kHistory), 4u);  // header + 3 epochs

  const auto e1 = fcanet_cli({"eval", "--config", config().string(), "--out", dir});
  ASSERT_EQ(e1.code, kOk) << e1.err;
  const auto csv = slurp(work("run") / kEvalReport);
  ASSERT_EQ(fcanet_cli({"eval", "--config", config().string(), "--out", dir}).code, kOk);
  EXPECT_EQ(slurp(work("run") / kEvalReport), csv);
  EXPECT_EQ(count_lines(work("run") / kEvalReport), 6u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,variant,attention,params,macs,condition,accuracy");
  for (const char* cond : {",clean,", ",20,", ",0,", ",-5,", ",-10,"}) EXPECT_NE(csv.find(cond), std::string::npos);

  // A config describing another network cannot score this checkpoint.
  const auto wide = work("wide.cfg");
  std::ofstream(wide) << slurp(config()) << "model.post_blocks = 2\n";
  const auto bad = fcanet_cli({"eval", "--config", wide.string(), "--out", dir});
  EXPECT_EQ(bad.code, kBadInput);
  EXPECT_NE(bad.err.find("post_blocks"), std::string::npos) << bad.err;

  // Resuming loads the exact weights: a probe batch gives identical logits.
  auto saved = model::load_checkpoint<float>(work("run") / kCheckpoint);
  train::Net resumed(saved.config(), 77);
  model::restore_checkpoint(resumed, slurp(work("run") / kCheckpoint));
  const auto probe = numerics::Tensor<float>::full({2, 40, 101}, 0.25f);
  const auto a = saved.forward(probe, numerics::BatchNormMode::eval);
  const auto b = resumed.forward(probe, numerics::BatchNormMode::eval);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  const auto r = fcanet_cli({"train", "--config", config().string(), "--out", work("run").string(), "--resume",
                             (work("run") / kCheckpoint).string()});
  EXPECT_EQ(r.code, kOk) << r.err;
}

TEST_F(CliRun, NanGradientAbortsWithExitThree) {
  ASSERT_EQ(prepare("nan").code, kOk);
  const auto r = fcanet_cli({"train", "--config", config().string(), "--out", work("nan").string(), "--inject-fault",
                             "linear:nan"});
  EXPECT_EQ(r.code, kNumericAbort);
  EXPECT_NE(r.err.find("non-finite gradient"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(work("nan") / kCheckpoint));
}

TEST_F(CliRun, TrainWithoutPrepareExitsTwo) {
  const auto r = fcanet_cli({"train", "--config", config().string(), "--out", work("unprepared").string()});
  EXPECT_EQ(r.code, kBadInput);
}

TEST(Eval, RandomWeightsScoreNearChance) {
  train::MemoryExamples set;
  for (std::size_t k = 0; k < 240; ++k) {
    set.add({synth::keyword(k % 12, 7000 + k), "", ""}, k % 12, "c" + std::to_string(k));
  }
  train::Net net(model::desk_config(), 12);
  train::TrainPlan plan;
  train::Trainer t(net, plan, {&set, nullptr, nullptr});
  const double acc = t.evaluate(set, data::MixCondition::clean());
  // 1/12 with a binomial standard error of about 0.018 at n = 240.
  EXPECT_NEAR(acc, 1.0 / 12.0, 0.08);
}

TEST(Gradcheck, CleanBuildPassesAndCorruptedBackwardFails) {
  const auto dir = fs::temp_directory_path() / "fcanet_gradcheck_test";
  const auto ok = fcanet_cli({"gradcheck", "--seeds", "2", "--coords", "4", "--out", dir.string()});
  EXPECT_EQ(ok.code, kOk) << ok.out;
  std::size_t model_cases = 0;
  std::ifstream in(dir / kGradReport);
  for (std::string line; std::getline(in, line);) model_cases += line.rfind("model:", 0) == 0;
  EXPECT_GE(model_cases, 12u);

  const auto bad = fcanet_cli({"gradcheck", "--seeds", "1", "--coords", "4", "--inject-fault", "swap_last_axes:1.01"});
  EXPECT_EQ(bad.code, kVerificationFailed);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}
