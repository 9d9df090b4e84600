#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "fcanet/common/errors.hpp"
#include "fcanet/data/curriculum.hpp"
#include "fcanet/data/dataset.hpp"
#include "fcanet/data/labels.hpp"
#include "fcanet/data/manifest.hpp"
#include "fcanet/data/mixing.hpp"
#include "fcanet/data/mixup.hpp"
#include "support/corpus.hpp"
#include "support/synth.hpp"

using namespace fcanet;
using namespace fcanet::data;
namespace fs = std::filesystem;

namespace {

features::AudioClip speech_clip(std::uint64_t seed) { return {synth::keyword(seed % 10, seed), "yes", "spk"}; }

std::vector<float> noise_source(std::uint64_t seed, std::size_t n, double amp = 0.2) {
  auto d = synth::random_clip(seed, n, amp);
  return {d.begin(), d.end()};
}

fs::path scratch(const std::string& name) {
  // Keyed by test so parallel ctest runs never share a directory.
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto p = fs::temp_directory_path() / ("fcanet_data_" + name + "_" + info->test_suite_name() + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Labels, Examples) {
  EXPECT_EQ(class_name(build_label("yes")), "yes");
  EXPECT_EQ(build_label("bird"), kUnknownId);
  EXPECT_EQ(build_label(kSilenceMarker), kSilenceId);
  EXPECT_THROW(build_label("banana"), DataError);
  EXPECT_THROW(build_label("silence"), DataError);
}

TEST(Labels, BijectiveOverClassNames) {
  std::map<std::size_t, int> hits;
  for (auto w : kVocabulary) ++hits[build_label(w)];
  // Ten keywords once each, 25 other words to unknown.
  for (std::size_t id = 0; id < 10; ++id) EXPECT_EQ(hits[id], 1) << class_name(id);
  EXPECT_EQ(hits[kUnknownId], 25);
  EXPECT_EQ(hits.count(kSilenceId), 0u);
}

TEST(MixAtSnr, GainExamples) {
  // A constant-power noise source makes every segment's power equal P_s.
  std::vector<float> noise(20000, 0.25f);
  features::AudioClip speech{std::vector<double>(16000, 0.25), "yes", "s"};
  std::mt19937_64 rng(1);
  EXPECT_DOUBLE_EQ(mix_at_snr(speech, noise, 0.0, rng).gain, 1.0);
  EXPECT_NEAR(mix_at_snr(speech, noise, 20.0, rng).gain, 0.1, 1e-15);
}

TEST(MixAtSnr, RecomputedSnrMatchesTarget) {
  std::mt19937_64 rng(2);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto noise = noise_source(100 + s, 16000 + 3000 * s, 0.05 + 0.01 * static_cast<double>(s));
    for (double target : {20.0, 0.0, -5.0, -10.0}) {
      const auto r = mix_at_snr(speech_clip(s), noise, target, rng);
      EXPECT_NEAR(snr_db(r.speech, r.noise), target, 1e-9);
      for (std::size_t i = 0; i < r.speech.size(); i += 997) {
        EXPECT_DOUBLE_EQ(r.mixed.samples[i], (r.speech[i] + r.noise[i]) * r.rescale);
      }
    }
  }
}

TEST(MixAtSnr, JointRescaleOnlyWhenClipping) {
  std::mt19937_64 rng(3);
  const auto loud = noise_source(7, 16000, 0.9);
  const auto r = mix_at_snr(speech_clip(1), loud, -10.0, rng);
  ASSERT_LT(r.rescale, 1.0);
  double peak = 0.0;
  for (double v : r.mixed.samples) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 1.0, 1e-12);
  const auto q = mix_at_snr(speech_clip(1), noise_source(7, 16000, 0.001), 20.0, rng);
  EXPECT_EQ(q.rescale, 1.0);
}

TEST(MixAtSnr, SilentInputsAreDataErrors) {
  std::mt19937_64 rng(4);
  features::AudioClip silent{std::vector<double>(16000, 0.0), "yes", "s"};
  EXPECT_THROW(mix_at_snr(silent, noise_source(1, 16000), 0.0, rng), DataError);
  EXPECT_THROW(mix_at_snr(speech_clip(2), std::vector<float>(32000, 0.0f), 0.0, rng), DataError);
}

TEST(NoiseSegment, TilesShortSources) {
  std::vector<float> shortn = {1, 2, 3};
  const auto seg = noise_segment(shortn, 2);
  ASSERT_EQ(seg.size(), 16000u);
  EXPECT_EQ(seg[0], 3);
  EXPECT_EQ(seg[1], 1);
  EXPECT_EQ(seg[15999], shortn[(2 + 15999) % 3]);
  // Long sources never wrap.
  std::mt19937_64 rng(5);
  std::vector<float> ramp(17000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<float>(i);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_noise_segment(ramp, rng);
    EXPECT_EQ(s.back() - s.front(), 15999.0);
  }
}

TEST(ApplyCondition, CleanIgnoresNoise) {
  std::mt19937_64 rng(6);
  const auto clip = speech_clip(3);
  EXPECT_EQ(apply_condition(clip, MixCondition::clean(), {}, rng).samples, clip.samples);
}

TEST(Curriculum, PoolsPerStage) {
  const std::vector<std::vector<MixCondition>> expected = {
      {MixCondition::clean()},
      {MixCondition::clean(), MixCondition::at(0)},
      {MixCondition::clean(), MixCondition::at(0), MixCondition::at(-5)},
      {MixCondition::clean(), MixCondition::at(0), MixCondition::at(-5), MixCondition::at(-10)}};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(CurriculumStage::make(k).pool, expected[k]);
  EXPECT_THROW(CurriculumStage::make(4), ArgumentError);
}

TEST(Curriculum, SamplerStatistics) {
  std::mt19937_64 rng(7);
  const auto s0 = CurriculumStage::make(0), s1 = CurriculumStage::make(1), s3 = CurriculumStage::make(3);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(curriculum_condition(s0, rng).is_clean());
    const auto c = curriculum_condition(s1, rng);
    EXPECT_TRUE(c.is_clean() || c.snr_db == 0.0);
  }
  std::map<std::string, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[curriculum_condition(s3, rng).name()];
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [name, n] : counts) EXPECT_NEAR(n / double(draws), 0.25, 0.01) << name;
}

TEST(StageSchedule, PrefixSums) {
  const StageLengths lengths{10, 10, 10, 1000};
  EXPECT_EQ(stage_schedule(0, lengths).index, 0u);
  EXPECT_EQ(stage_schedule(9, lengths).index, 0u);
  EXPECT_EQ(stage_schedule(10, lengths).index, 1u);
  EXPECT_EQ(stage_schedule(25, lengths).index, 2u);
  EXPECT_EQ(stage_schedule(30, lengths).index, 3u);
  EXPECT_EQ(stage_schedule(100000, lengths).index, 3u);
  std::size_t prev = 0;
  for (std::size_t e = 0; e < 60; ++e) {
    const std::size_t k = stage_schedule(e, {3, 1, 7, 1}).index;
    EXPECT_GE(k, prev);
    prev = k;
  }
  EXPECT_THROW(stage_schedule(0, {0, 1, 1, 1}), ArgumentError);
}

TEST(Mixup, Examples) {
  Batch b{3, 2, 3, {1, 2, 3, 4, 5, 6}, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  EXPECT_EQ(apply_mixup(b, {1.0, {2, 0, 1}}).features, b.features);
  EXPECT_EQ(apply_mixup(b, {1.0, {2, 0, 1}}).label_weights, b.label_weights);

  const auto half = apply_mixup(b, {0.5, {1, 0, 2}});
  EXPECT_EQ(std::vector<double>(half.label_weights.begin(), half.label_weights.begin() + 3),
            (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_EQ(half.features[0], 2.0);

  Batch single{1, 2, 3, {1, 2}, {0, 0, 1}};
  std::mt19937_64 rng(8);
  const auto same = mixup(single, 0.2, rng);
  EXPECT_EQ(same.features, single.features);
  EXPECT_EQ(same.label_weights, single.label_weights);
}

TEST(Mixup, RowMassAndShape) {
  std::mt19937_64 rng(9);
  Batch b{16, 40, 12, std::vector<double>(16 * 40), std::vector<double>(16 * 12, 0.0)};
  for (std::size_t i = 0; i < 16; ++i) b.label_weights[i * 12 + i % 12] = 1.0;
  for (double& v : b.features) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  double lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto draw = draw_mixup(16, 0.2, rng);
    lo = std::min(lo, draw.lambda);
    hi = std::max(hi, draw.lambda);
    const auto m = apply_mixup(b, draw);
    ASSERT_EQ(m.features.size(), b.features.size());
    for (std::size_t i = 0; i < 16; ++i) {
      double mass = 0.0;
      for (std::size_t k = 0; k < 12; ++k) mass += m.label_weights[i * 12 + k];
      EXPECT_NEAR(mass, 1.0, 1e-12);
    }
  }
  // Beta(0.2, 0.2) piles up near both ends.
  EXPECT_LT(lo, 0.05);
  EXPECT_GT(hi, 0.95);
}

TEST(Manifest, DiscoverWriteReadValidate) {
  const auto root = scratch("manifest");
  corpus::write(root);
  const CorpusPaths paths{root / "speech", root / "noise"};
  const auto m = discover_manifest(paths);
  EXPECT_EQ(m.entries.size(), 18u);
  EXPECT_EQ(m.noise.size(), 3u);
  EXPECT_EQ(count_split(m, Split::val), 3u);
  EXPECT_EQ(count_split(m, Split::test), 3u);
  EXPECT_EQ(m.noise[0].path, "n1.wav");
  EXPECT_DOUBLE_EQ(m.noise[0].duration_s, 1.5);
  EXPECT_EQ(m.noise[2].path, "sub/n0.wav");
  EXPECT_NO_THROW(validate_manifest(m, paths));

  write_manifest(m, root / "m.tsv", root / "n.tsv");
  EXPECT_EQ(read_manifest(root / "m.tsv", root / "n.tsv"), m);

  auto leaky = m;
  leaky.entries.push_back({"no/spk0_nohash_1.wav", "no", Split::test});
  EXPECT_THROW(validate_manifest(leaky, paths), DataError);
  auto missing = m;
  missing.entries[0].path = "yes/ghost_nohash_0.wav";
  EXPECT_THROW(validate_manifest(missing, paths), DataError);

  EXPECT_THROW(discover_manifest({root / "speech", root / "nope"}), ConfigError);
  fs::remove_all(root);
}

TEST(Manifest, HashSplitKeepsSpeakersTogether) {
  const auto root = scratch("hashsplit");
  corpus::Layout layout;
  layout.official_lists = false;
  layout.speakers = 40;
  corpus::write(root, layout);
  const CorpusPaths paths{root / "speech", root / "noise"};
  const auto m = discover_manifest(paths);
  EXPECT_NO_THROW(validate_manifest(m, paths));
  EXPECT_GT(count_split(m, Split::train), count_split(m, Split::test));
  EXPECT_EQ(source_id_of("yes/abc_nohash_3.wav"), "abc");
  fs::remove_all(root);
}

class EvalSets : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = scratch("eval");
    corpus::write(root_);
    paths_ = {root_ / "speech", root_ / "noise"};
    manifest_ = discover_manifest(paths_);
    noise_ = NoiseBank::load(manifest_, paths_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
  CorpusPaths paths_;
  Manifest manifest_;
  NoiseBank noise_;
};

TEST_F(EvalSets, SilenceClipsJoinTheSplit) {
  ClipSource test(manifest_, Split::test, paths_, noise_, 1, 0.34);
  ASSERT_EQ(test.size(), 4u);
  EXPECT_TRUE(test.ref(3).silence);
  EXPECT_EQ(test.ref(3).label, kSilenceId);
  const auto s = test.load(3);
  EXPECT_NEAR(features::mean_square(s.samples), test.silence_power(), 1e-12);
  EXPECT_EQ(s.samples, test.load(3).samples);
  EXPECT_THROW(ClipSource(manifest_, Split::test, paths_, NoiseBank{}, 1, 0.5), ConfigError);
}

TEST_F(EvalSets, ReproducibleAndExact) {
  ClipSource test(manifest_, Split::test, paths_, noise_, 1, 0.34);
  const auto a = build_eval_sets(test, noise_, 42);
  const auto b = build_eval_sets(test, noise_, 42);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(a[k], b[k]);

  // Clean set equals the source audio.
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto src = test.load(i).samples;
    ASSERT_EQ(a[0].audio[i].size(), src.size());
    for (std::size_t j = 0; j < src.size(); ++j) ASSERT_EQ(a[0].audio[i][j], static_cast<float>(src[j]));
  }
  // Noisy conditions hit the nominal SNR per clip.
  for (std::size_t k = 1; k < 5; ++k) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto r = eval_mix(test.load(i), test.ref(i).clip_id, a[k].condition, noise_, 42);
      EXPECT_NEAR(snr_db(r.speech, r.noise), a[k].condition.snr_db, 1e-6);
    }
  }
  const auto other = build_eval_set(test, noise_, MixCondition::at(0), 43);
  EXPECT_NE(other.audio, a[2].audio);

  write_eval_set(a[3], root_ / "x.bin");
  write_eval_set(b[3], root_ / "y.bin");
  EXPECT_EQ(read_eval_set(root_ / "x.bin"), a[3]);
  EXPECT_EQ(sha256_hex(root_ / "x.bin"), sha256_hex(root_ / "y.bin"));
  EXPECT_EQ(sha256_hex(root_ / "x.bin").size(), 64u);
  EXPECT_EQ(eval_set_file_name(MixCondition::at(-5)), "eval_-5dB.bin");

  EXPECT_THROW(build_eval_sets(test, NoiseBank{}, 42), ConfigError);
}

TEST(Sha256, KnownDigest) {
  const auto dir = scratch("sha");
  std::ofstream(dir / "abc") << "abc";
  EXPECT_EQ(sha256_hex(dir / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}
