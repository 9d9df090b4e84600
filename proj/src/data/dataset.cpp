#include "fcanet/data/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fcanet/common/errors.hpp"
#include "fcanet/common/parallel.hpp"
#include "fcanet/common/seed.hpp"
#include "fcanet/data/labels.hpp"

namespace fs = std::filesystem;

namespace fcanet::data {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::size_t kPowerProbe = 256;
constexpr char kEvalMagic[4] = {'F', 'C', 'A', 'E'};
constexpr std::uint32_t kEvalVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated eval set file");
  return v;
}

}  // namespace

NoiseBank NoiseBank::load(const Manifest& manifest, const CorpusPaths& paths) {
  NoiseBank bank;
  bank.names.resize(manifest.noise.size());
  bank.clips.resize(manifest.noise.size());
  parallel_for(manifest.noise.size(), [&](std::size_t i) {
    const auto samples = features::read_wav(paths.noise_root / manifest.noise[i].path);
    if (samples.empty()) throw DataError("empty noise file " + manifest.noise[i].path);
    bank.names[i] = manifest.noise[i].path;
    bank.clips[i].assign(samples.begin(), samples.end());
  });
  return bank;
}

features::AudioClip silence_clip(const NoiseBank& noise, double target_power, std::uint64_t seed,
                                 std::string_view clip_id) {
  if (noise.empty()) throw ConfigError("silence clips need a noise corpus");
  std::mt19937_64 rng(derive_seed(seed, "silence:" + std::string(clip_id)));
  const auto& src = noise.clips[std::uniform_int_distribution<std::size_t>(0, noise.clips.size() - 1)(rng)];
  std::vector<double> seg;
  double p = 0.0;
  for (int draw = 0; draw < 10 && !(p > 0.0); ++draw) {
    seg = random_noise_segment(src, rng);
    p = features::mean_square(seg);
  }
  if (!(p > 0.0)) throw DataError("no audible noise segment for silence clip " + std::string(clip_id));
  const double g = std::sqrt(target_power / p);
  for (double& v : seg) v = std::clamp(v * g, -1.0, 1.0);
  return {std::move(seg), std::string(kSilenceMarker), std::string(clip_id)};
}

ClipSource::ClipSource(const Manifest& manifest, Split split, CorpusPaths paths, const NoiseBank& noise,
                       std::uint64_t seed, double silence_fraction)
    : manifest_(&manifest), paths_(std::move(paths)), noise_(&noise), seed_(seed), split_(split) {
  if (!(silence_fraction >= 0.0)) throw ConfigError("silence_fraction must be nonnegative");
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.split == split) refs_.push_back({e.path, build_label(e.word), false, i});
  }
  const std::size_t speech = refs_.size();
  const auto silent = static_cast<std::size_t>(std::llround(silence_fraction * static_cast<double>(speech)));
  if (silent == 0) return;
  if (noise.empty()) throw ConfigError("silence clips need a noise corpus");

  // Median power over an evenly strided probe of the split's speech.
  const std::size_t probe = std::min(speech, kPowerProbe);
  std::vector<double> powers(probe);
  parallel_for(probe, [&](std::size_t k) { powers[k] = features::mean_square(load(k * speech / probe).samples); });
  std::nth_element(powers.begin(), powers.begin() + probe / 2, powers.end());
  silence_power_ = powers[probe / 2];

  for (std::size_t k = 0; k < silent; ++k) {
    refs_.push_back({std::string(kSilenceMarker) + "/" + std::string(split_name(split)) + "/" + std::to_string(k),
                     kSilenceId, true, 0});
  }
}

features::AudioClip ClipSource::load(std::size_t i) const {
  const ClipRef& r = refs_.at(i);
  if (r.silence) return silence_clip(*noise_, silence_power_, seed_, r.clip_id);
  const auto& e = manifest_->entries[r.entry];
  auto samples = features::read_wav(paths_.speech_root / e.path);
  if (samples.empty()) throw DataError("empty speech file " + e.path);
  return features::pad_or_trim({std::move(samples), e.word, source_id_of(e.path)});
}

MixResult eval_mix(const features::AudioClip& clip, std::string_view clip_id, const MixCondition& condition,
                   const NoiseBank& noise, std::uint64_t seed) {
  if (condition.is_clean()) {
    MixResult r;
    r.mixed = clip;
    r.speech = clip.samples;
    r.noise.assign(clip.samples.size(), 0.0);
    return r;
  }
  if (noise.empty()) throw ConfigError("noisy eval sets need a noise corpus");
  std::mt19937_64 rng(derive_seed(seed, "eval:" + condition.name() + ":" + std::string(clip_id)));
  const auto& src = noise.clips[std::uniform_int_distribution<std::size_t>(0, noise.clips.size() - 1)(rng)];
  return mix_at_snr(clip, src, condition.snr_db, rng);
}

EvalSet build_eval_set(const ClipSource& test, const NoiseBank& noise, const MixCondition& condition,
                       std::uint64_t seed) {
  if (!condition.is_clean() && noise.empty()) throw ConfigError("noisy eval sets need a noise corpus");
  EvalSet set;
  set.condition = condition;
  set.clip_ids.resize(test.size());
  set.labels.resize(test.size());
  set.audio.resize(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const ClipRef& r = test.ref(i);
    const auto mixed = eval_mix(test.load(i), r.clip_id, condition, noise, seed).mixed;
    set.clip_ids[i] = r.clip_id;
    set.labels[i] = r.label;
    set.audio[i].assign(mixed.samples.begin(), mixed.samples.end());
  });
  return set;
}

std::array<EvalSet, 5> build_eval_sets(const ClipSource& test, const NoiseBank& noise, std::uint64_t seed) {
  if (noise.empty()) throw ConfigError("eval sets need a noise corpus");
  std::array<EvalSet, 5> sets;
  const auto conditions = eval_conditions();
  for (std::size_t k = 0; k < sets.size(); ++k) sets[k] = build_eval_set(test, noise, conditions[k], seed);
  return sets;
}

std::string eval_set_file_name(const MixCondition& condition) {
  return "eval_" + (condition.is_clean() ? condition.name() : condition.name() + "dB") + ".bin";
}

void write_eval_set(const EvalSet& set, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write eval set " + path.string());
  out.write(kEvalMagic, 4);
  put<std::uint32_t>(out, kEvalVersion);
  put<std::uint8_t>(out, set.condition.is_clean() ? 0 : 1);
  put<double>(out, set.condition.snr_db);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.audio.size()));
  for (std::size_t i = 0; i < set.audio.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(set.clip_ids[i].size()));
    out.write(set.clip_ids[i].data(), static_cast<std::streamsize>(set.clip_ids[i].size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(set.labels[i]));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(set.audio[i].size()));
    out.write(reinterpret_cast<const char*>(set.audio[i].data()),
              static_cast<std::streamsize>(set.audio[i].size() * sizeof(float)));
  }
  if (!out) throw ConfigError("failed writing eval set " + path.string());
}

EvalSet read_eval_set(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read eval set " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEvalMagic, 4) != 0) throw DataError("not an eval set: " + path.string());
  if (get<std::uint32_t>(in) != kEvalVersion) throw DataError("unsupported eval set version");
  EvalSet set;
  const bool noisy = get<std::uint8_t>(in) != 0;
  const double db = get<double>(in);
  set.condition = noisy ? MixCondition::at(db) : MixCondition::clean();
  const auto n = get<std::uint32_t>(in);
  set.clip_ids.resize(n);
  set.labels.resize(n);
  set.audio.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    set.clip_ids[i].resize(get<std::uint32_t>(in));
    if (!in.read(set.clip_ids[i].data(), static_cast<std::streamsize>(set.clip_ids[i].size()))) {
      throw DataError("truncated eval set file");
    }
    set.labels[i] = get<std::uint32_t>(in);
    if (set.labels[i] >= kNumClasses) throw DataError("eval set label out of range");
    set.audio[i].resize(get<std::uint32_t>(in));
    if (!in.read(reinterpret_cast<char*>(set.audio[i].data()),
                 static_cast<std::streamsize>(set.audio[i].size() * sizeof(float)))) {
      throw DataError("truncated eval set file");
    }
  }
  return set;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

}  // namespace fcanet::data
