#include "fcanet/model/config.hpp"

#include <array>
#include <cmath>

#include "fcanet/common/errors.hpp"

namespace fcanet::model {

namespace {

constexpr std::array<std::string_view, 4> kAttentionNames = {"none", "se", "eca", "c2d"};
constexpr std::array<std::string_view, 5> kPlacementNames = {"none", "pre", "post", "all", "final"};

template <class E, std::size_t N>
void parse_enum(std::string_view key, std::string_view text, const std::array<std::string_view, N>& names, E& out) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) {
      out = static_cast<E>(i);
      return;
    }
  }
  throw ConfigError("config key '" + std::string(key) + "': unknown value '" + std::string(text) + "'");
}

}  // namespace

std::string format(Attention a) { return std::string(kAttentionNames[static_cast<std::size_t>(a)]); }
std::string format(Placement p) { return std::string(kPlacementNames[static_cast<std::size_t>(p)]); }

void parse_value(std::string_view key, std::string_view text, Attention& out) {
  parse_enum(key, text, kAttentionNames, out);
}
void parse_value(std::string_view key, std::string_view text, Placement& out) {
  parse_enum(key, text, kPlacementNames, out);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model: ") + name + " must be positive");
  };
  positive(input_bins, "input_bins");
  positive(input_frames, "input_frames");
  positive(pre_blocks, "pre_blocks");
  positive(stem_channels, "stem_channels");
  positive(block_channels, "block_channels");
  positive(post_blocks, "post_blocks");
  positive(kernel_f, "kernel_f");
  positive(kernel_t, "kernel_t");
  positive(kernel_t1, "kernel_t1");
  positive(se_reduction, "se_reduction");
  positive(c2d_mid, "c2d_mid");
  positive(classes, "classes");
  if (!(mix_expansion > 0.0) || !std::isfinite(mix_expansion)) throw ConfigError("model: mix_expansion must be positive");
  if (pre_blocks == 1 && stem_channels != block_channels) {
    throw ConfigError("model: with one pre block stem_channels must equal block_channels");
  }
  if ((attention == Attention::none) != (placement == Placement::none)) {
    throw ConfigError("model: placement must be none exactly when attention is none");
  }
}

std::size_t ModelConfig::mix_hidden_time() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mix_expansion * static_cast<double>(input_frames))));
}

std::size_t ModelConfig::mix_hidden_freq() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mix_expansion * static_cast<double>(input_bins))));
}

std::size_t ModelConfig::se_hidden(std::size_t channels) const {
  return std::max<std::size_t>(1, channels / se_reduction);
}

std::size_t ModelConfig::attention_sites() const {
  switch (placement) {
    case Placement::none: return 0;
    case Placement::pre: return pre_blocks;
    case Placement::post: return post_blocks;
    case Placement::all: return blocks;
    case Placement::final: return 1;
  }
  return 0;
}

std::string ModelConfig::to_kv() const {
  kv::Writer w;
  fields(*this, w);
  return w.str();
}

ModelConfig ModelConfig::from_kv(std::string_view text) {
  const auto doc = kv::parse(text);
  ModelConfig cfg;
  kv::Reader r(doc);
  fields(cfg, r);
  r.reject_unknown();
  return cfg;
}

std::size_t eca_kernel_size(std::size_t channels) {
  const double t = std::log2(static_cast<double>(std::max<std::size_t>(1, channels))) / 2.0 + 0.5;
  const double half = std::ceil((t - 1.0) / 2.0 - 0.5);
  return half < 0.0 ? 1 : static_cast<std::size_t>(2.0 * half + 1.0);
}

ModelConfig desk_config() {
  ModelConfig c;
  c.blocks = 2;
  c.block_channels = 4;
  c.stem_channels = 4;
  c.kernel_f = 3;
  c.kernel_t = 3;
  c.kernel_t1 = 5;
  return c;
}

}  // namespace fcanet::model
