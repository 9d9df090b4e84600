#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "fcanet/common/kv.hpp"

namespace fcanet::model {

enum class Attention { none, se, eca, c2d };
enum class Placement { none, pre, post, all, final };

std::string format(Attention a);
std::string format(Placement p);
void parse_value(std::string_view key, std::string_view text, Attention& out);
void parse_value(std::string_view key, std::string_view text, Placement& out);

struct ModelConfig {
  std::size_t input_bins = 40;
  std::size_t input_frames = 101;
  std::size_t pre_blocks = 1;
  // Width of the pre blocks before the last one; must equal block_channels
  // when there is a single pre block.
  std::size_t stem_channels = 3;
  std::size_t blocks = 5;
  std::size_t block_channels = 3;
  std::size_t post_blocks = 1;
  std::size_t kernel_f = 5;   // 2D DWS kernel, frequency extent
  std::size_t kernel_t = 5;   // 2D DWS kernel, time extent
  std::size_t kernel_t1 = 9;  // 1D DWS kernel along time
  double mix_expansion = 1.0;
  Attention attention = Attention::c2d;
  Placement placement = Placement::all;
  std::size_t se_reduction = 8;
  std::size_t c2d_mid = 4;
  std::size_t classes = 12;

  // Throws ConfigError.
  void validate() const;

  std::size_t mix_hidden_time() const;
  std::size_t mix_hidden_freq() const;
  std::size_t se_hidden(std::size_t channels) const;
  // Number of attention modules the placement inserts.
  std::size_t attention_sites() const;

  template <class Self, class V>
  static void fields(Self& c, V&& v) {
    v("input_bins", c.input_bins);
    v("input_frames", c.input_frames);
    v("pre_blocks", c.pre_blocks);
    v("stem_channels", c.stem_channels);
    v("blocks", c.blocks);
    v("block_channels", c.block_channels);
    v("post_blocks", c.post_blocks);
    v("kernel_f", c.kernel_f);
    v("kernel_t", c.kernel_t);
    v("kernel_t1", c.kernel_t1);
    v("mix_expansion", c.mix_expansion);
    v("attention", c.attention);
    v("placement", c.placement);
    v("se_reduction", c.se_reduction);
    v("c2d_mid", c.c2d_mid);
    v("classes", c.classes);
  }

  std::string to_kv() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static ModelConfig from_kv(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Two narrow blocks at full 40 x 101 resolution, for quick training runs.
ModelConfig desk_config();

// Kernel of the ECA 1D convolution: the odd integer nearest to
// log2(C)/2 + 1/2, ties toward the smaller one, at least 1.
std::size_t eca_kernel_size(std::size_t channels);

}  // namespace fcanet::model
