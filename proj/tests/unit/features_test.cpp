#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fcanet/common/errors.hpp"
#include "fcanet/features/audio.hpp"
#include "fcanet/features/mfcc.hpp"
#include "support/dsp_oracle.hpp"
#include "support/synth.hpp"

using namespace fcanet;
using namespace fcanet::features;

namespace {

AudioClip clip_of(std::vector<double> s) { return AudioClip{std::move(s), "yes", "spk"}; }

const MfccExtractor& extractor() {
  static const MfccExtractor ex;
  return ex;
}

}  // namespace

TEST(PadOrTrim, Examples) {
  auto full = clip_of(synth::random_clip(1));
  EXPECT_EQ(pad_or_trim(full).samples, full.samples);

  auto short_clip = clip_of(synth::random_clip(2, 12000));
  auto padded = pad_or_trim(short_clip);
  ASSERT_EQ(padded.samples.size(), 16000u);
  EXPECT_TRUE(std::equal(short_clip.samples.begin(), short_clip.samples.end(), padded.samples.begin()));
  for (std::size_t i = 12000; i < 16000; ++i) EXPECT_EQ(padded.samples[i], 0.0);

  auto long_clip = clip_of(synth::random_clip(3, 17000));
  auto trimmed = pad_or_trim(long_clip);
  EXPECT_TRUE(std::equal(trimmed.samples.begin(), trimmed.samples.end(), long_clip.samples.begin()));
  EXPECT_EQ(trimmed.samples.size(), 16000u);

  EXPECT_THROW(pad_or_trim(clip_of({})), ArgumentError);
}

TEST(TimeShift, Examples) {
  auto c = clip_of(synth::random_clip(4, 16000, 0.5));
  for (double& s : c.samples) s += 0.6;  // no exact zeros in the source
  EXPECT_EQ(time_shift(c, 0).samples, c.samples);

  auto fwd = time_shift(c, 100);
  for (std::size_t i = 0; i < 1600; ++i) EXPECT_EQ(fwd.samples[i], 0.0);
  EXPECT_EQ(fwd.samples[1600], c.samples[0]);
  EXPECT_EQ(fwd.samples.size(), 16000u);

  auto back = time_shift(c, -100);
  for (std::size_t i = 16000 - 1600; i < 16000; ++i) EXPECT_EQ(back.samples[i], 0.0);
  EXPECT_EQ(back.samples[0], c.samples[1600]);

  EXPECT_THROW(time_shift(c, 100.5), ArgumentError);
}

TEST(MelSpectrogram, SilenceAndShape) {
  auto mel = extractor().mel_spectrogram(clip_of(std::vector<double>(16000, 0.0)));
  EXPECT_EQ(mel.bins, 64u);
  EXPECT_EQ(mel.frames, 101u);
  for (double v : mel.values) EXPECT_EQ(v, 0.0);
}

TEST(MelSpectrogram, SinePeaksAtNearestFilter) {
  auto mel = extractor().mel_spectrogram(clip_of(synth::sine(1000.0)));
  const auto& centers = extractor().centers();
  std::size_t nearest = 0;
  for (std::size_t m = 1; m < centers.size(); ++m) {
    if (std::abs(centers[m] - 1000.0) < std::abs(centers[nearest] - 1000.0)) nearest = m;
  }
  for (std::size_t t = 5; t < 96; ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < 64; ++m)
      if (mel.at(m, t) > mel.at(arg, t)) arg = m;
    EXPECT_EQ(arg, nearest) << "frame " << t;
  }
}

TEST(MelSpectrogram, NonnegativeAndDeterministic) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto c = clip_of(synth::random_clip(100 + s));
    auto a = extractor()(c);
    auto b = extractor()(c);
    EXPECT_EQ(a.values, b.values);
    for (double v : extractor().mel_spectrogram(c).values) EXPECT_GE(v, 0.0);
    EXPECT_EQ(a.bins, 40u);
    EXPECT_EQ(a.frames, 101u);
  }
}

TEST(MelSpectrogram, RejectsUnpaddedClip) {
  EXPECT_THROW(extractor().mel_spectrogram(clip_of(synth::random_clip(5, 100))), ArgumentError);
}

TEST(Mfcc, ConstantPlaneHasOnlyDcCoefficient) {
  FeatureMap mel(64, 3);
  std::fill(mel.values.begin(), mel.values.end(), 2.5);
  auto c = extractor().mfcc(mel);
  EXPECT_EQ(c.bins, 40u);
  EXPECT_EQ(c.frames, 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(c.at(0, t), std::sqrt(64.0) * std::log(2.5 + 1e-10), 1e-12);
    for (std::size_t k = 1; k < 40; ++k) EXPECT_NEAR(c.at(k, t), 0.0, 1e-12);
  }
}

TEST(Mfcc, RandomFrameMatchesDirectDct) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  FeatureMap mel(64, 1);
  for (double& v : mel.values) v = u(rng);
  auto c = extractor().mfcc(mel);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < 40; ++k) {
    double acc = 0.0;
    for (std::size_t m = 0; m < 64; ++m) acc += std::log(mel.values[m] + 1e-10) * std::cos(pi * k * (m + 0.5) / 64.0);
    acc *= std::sqrt((k == 0 ? 1.0 : 2.0) / 64.0);
    EXPECT_NEAR(c.at(k, 0), acc, 1e-8);
  }
}

TEST(Mfcc, RejectsNegativeEnergy) {
  FeatureMap mel(64, 1);
  mel.values[3] = -1e-3;
  EXPECT_THROW(extractor().mfcc(mel), ArgumentError);
}

TEST(Mfcc, MatchesDirectSummationOracle) {
  auto c = clip_of(synth::keyword(2, 7));
  auto mel = extractor().mel_spectrogram(c);
  auto got = extractor().mfcc(mel);
  auto ref = oracle::mfcc(c.samples);
  for (std::size_t t = 0; t < 101; ++t) {
    for (std::size_t m = 0; m < 64; ++m) {
      EXPECT_LE(std::abs(mel.at(m, t) - ref.mel[m][t]), 1e-6 * std::max(1.0, std::abs(ref.mel[m][t])));
    }
    for (std::size_t k = 0; k < 40; ++k) {
      EXPECT_LE(std::abs(got.at(k, t) - ref.mfcc[k][t]), 1e-6 * std::max(1.0, std::abs(ref.mfcc[k][t])));
    }
  }
}

TEST(PowerSpectrum, ParsevalOnRandomFrames) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = synth::random_clip(rng(), 400, 1.0);
    for (std::size_t n = 0; n < 400; ++n) x[n] *= extractor().window()[n];
    auto p = extractor().power_spectrum(x);
    double freq = p[0] + p[200];
    for (std::size_t k = 1; k < 200; ++k) freq += 2.0 * p[k];
    freq /= 400.0;
    double time = 0.0;
    for (double v : x) time += v * v;
    EXPECT_LE(std::abs(freq - time), 1e-6 * time);
  }
}

TEST(SpecMask, ZeroWidthIsIdentity) {
  auto feat = extractor()(clip_of(synth::random_clip(9)));
  EXPECT_EQ(apply_spec_mask(feat, MaskDraw{10, 0, 5, 0}).values, feat.values);
}

TEST(SpecMask, MasksExactlyTheStripes) {
  auto feat = extractor()(clip_of(synth::random_clip(10)));
  const MaskDraw d{20, 7, 3, 4};
  auto m = apply_spec_mask(feat, d);
  for (std::size_t b = 0; b < feat.bins; ++b)
    for (std::size_t t = 0; t < feat.frames; ++t) {
      const bool masked = (t >= 20 && t < 27) || (b >= 3 && b < 7);
      EXPECT_EQ(m.at(b, t), masked ? 0.0 : feat.at(b, t));
    }
}

TEST(SpecMask, WidthSamplerCoversZeroToTwentyFive) {
  std::mt19937_64 rng(11);
  std::size_t max_t = 0, max_f = 0, min_t = 99;
  for (int i = 0; i < 10000; ++i) {
    auto d = draw_spec_mask(40, 101, 25, rng);
    max_t = std::max(max_t, d.time_width);
    max_f = std::max(max_f, d.freq_width);
    min_t = std::min(min_t, d.time_width);
    ASSERT_LE(d.time_start + d.time_width, 101u);
    ASSERT_LE(d.freq_start + d.freq_width, 40u);
  }
  EXPECT_EQ(max_t, 25u);
  EXPECT_EQ(max_f, 25u);
  EXPECT_EQ(min_t, 0u);
  // Clamped to a short axis.
  auto d = draw_spec_mask(3, 4, 25, rng);
  EXPECT_LE(d.freq_width, 3u);
  EXPECT_LE(d.time_width, 4u);
}

TEST(Wav, RoundTripAndRejections) {
  const auto dir = std::filesystem::temp_directory_path() / "fcanet_wav_test";
  std::filesystem::create_directories(dir);
  auto x = synth::random_clip(12, 1234, 0.9);
  write_wav(dir / "a.wav", x);
  auto y = read_wav(dir / "a.wav");
  ASSERT_EQ(y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1.0 / 32768.0);

  // Patch the header to claim 44.1 kHz, then stereo.
  std::string bytes;
  {
    std::ifstream f(dir / "a.wav", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  auto rewrite = [&](std::string b) {
    std::ofstream f(dir / "b.wav", std::ios::binary);
    f.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  std::string rate = bytes;
  rate[24] = static_cast<char>(0x44);
  rate[25] = static_cast<char>(0xAC);
  rewrite(rate);
  EXPECT_THROW(read_wav(dir / "b.wav"), DataError);
  std::string stereo = bytes;
  stereo[22] = 2;
  rewrite(stereo);
  EXPECT_THROW(read_wav(dir / "b.wav"), DataError);
  EXPECT_THROW(read_wav(dir / "missing.wav"), DataError);
  std::filesystem::remove_all(dir);
}

TEST(MfccParams, Validation) {
  MfccParams p;
  EXPECT_NO_THROW(p.validate());
  p.n_mfcc = 65;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.f_max = 9000;
  EXPECT_THROW(p.validate(), ConfigError);
}
