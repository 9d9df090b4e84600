#include "fcanet/model/network.hpp"

#include "fcanet/common/errors.hpp"
#include "fcanet/model/layers.hpp"

namespace fcanet::model {

namespace {

// Channel widths entering and leaving pre block i.
std::size_t pre_in(const ModelConfig& c, std::size_t i) { return i == 0 ? 1 : c.stem_channels; }
std::size_t pre_out(const ModelConfig& c, std::size_t i) {
  return i + 1 == c.pre_blocks ? c.block_channels : c.stem_channels;
}

}  // namespace

Footprint count_footprint(const ModelConfig& c) {
  c.validate();
  const std::size_t F = c.input_bins, T = c.input_frames, P = F * T;
  Footprint fp;
  auto add = [&](std::string name, std::size_t params, std::size_t macs) {
    fp.params += params;
    fp.macs += macs;
    fp.layers.push_back({std::move(name), params, macs});
  };
  auto dws = [&](const std::string& name, std::size_t ci, std::size_t co, std::size_t kh, std::size_t kw) {
    add(name + ".dw", ci * kh * kw, ci * P * kh * kw);
    add(name + ".pw", ci * co + co, ci * co * P);
  };
  auto conv_block = [&](const std::string& name, std::size_t ci, std::size_t co) {
    dws(name, ci, co, 1, c.kernel_t1);
    add(name + ".bn", 2 * co, 0);
  };
  auto mlp = [&](const std::string& name, std::size_t d, std::size_t h, std::size_t rows) {
    add(name, 2 * d * h + h + d, 2 * d * h * rows);
  };
  // The attention plane is C x F wherever the module sits.
  auto attention = [&](const std::string& site, std::size_t ch) {
    const std::string n = site + ".att";
    switch (c.attention) {
      case Attention::none: break;
      case Attention::se: {
        const std::size_t h = c.se_hidden(ch);
        add(n + ".fc1", ch * h + h, ch * h);
        add(n + ".fc2", h * ch + ch, h * ch);
        break;
      }
      case Attention::eca: add(n + ".conv", eca_kernel_size(ch), eca_kernel_size(ch) * ch); break;
      case Attention::c2d:
        add(n + ".conv1", 9 * c.c2d_mid, 9 * c.c2d_mid * ch * F);
        add(n + ".bn", 2 * c.c2d_mid, 0);
        add(n + ".conv2", 9 * c.c2d_mid + 1, 9 * c.c2d_mid * ch * F);
        break;
    }
  };

  for (std::size_t i = 0; i < c.pre_blocks; ++i) {
    const std::string name = "pre" + std::to_string(i);
    conv_block(name, pre_in(c, i), pre_out(c, i));
    if (c.placement == Placement::pre) attention(name, pre_out(c, i));
  }
  const std::size_t C = c.block_channels;
  for (std::size_t b = 0; b < c.blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    dws(name + ".f", C, C, c.kernel_f, c.kernel_t);
    dws(name + ".f1", C, C, c.kernel_f, c.kernel_t);
    conv_block(name + ".f2a", C, C);
    conv_block(name + ".f2b", C, C);
    mlp(name + ".mix_t", T, c.mix_hidden_time(), C * F);
    mlp(name + ".mix_f", F, c.mix_hidden_freq(), C * T);
    if (c.placement == Placement::all) attention(name, C);
  }
  for (std::size_t i = 0; i < c.post_blocks; ++i) {
    const std::string name = "post" + std::to_string(i);
    conv_block(name, C, C);
    if (c.placement == Placement::post) attention(name, C);
  }
  if (c.placement == Placement::final) attention("final", C);
  add("head", C * c.classes + c.classes, C * c.classes);
  return fp;
}

template <std::floating_point T>
struct Network<T>::Impl {
  ModelConfig cfg;
  ParameterStore<T> store;
  std::vector<ConvBlock<T>> pre, post;
  std::vector<ConvMixerBlock<T>> blocks;
  std::vector<AttentionBlock<T>> attention;  // in site order
  std::vector<std::string> sites;
  Tensor<T> head_w, head_b;
  std::vector<Tensor<T>> last_attention;

  Impl(const ModelConfig& c, std::uint64_t seed) : cfg(c), store(seed) {
    auto attend_here = [&](const std::string& site, std::size_t ch) {
      attention.push_back(AttentionBlock<T>::make(store, site + ".att", cfg, ch));
      sites.push_back(site);
    };
    for (std::size_t i = 0; i < cfg.pre_blocks; ++i) {
      const std::string name = "pre" + std::to_string(i);
      pre.push_back(ConvBlock<T>::make(store, name, pre_in(cfg, i), pre_out(cfg, i), cfg.kernel_t1));
      if (cfg.placement == Placement::pre) attend_here(name, pre_out(cfg, i));
    }
    const std::size_t C = cfg.block_channels;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      const std::string name = "block" + std::to_string(b);
      blocks.push_back(ConvMixerBlock<T>::make(store, name, cfg));
      if (cfg.placement == Placement::all) attend_here(name, C);
    }
    for (std::size_t i = 0; i < cfg.post_blocks; ++i) {
      const std::string name = "post" + std::to_string(i);
      post.push_back(ConvBlock<T>::make(store, name, C, C, cfg.kernel_t1));
      if (cfg.placement == Placement::post) attend_here(name, C);
    }
    if (cfg.placement == Placement::final) attend_here("final", C);
    head_w = store.weight("head.w", {cfg.classes, C}, C);
    head_b = store.weight("head.b", {cfg.classes}, C);
  }

  Tensor<T> forward(const Tensor<T>& input, BatchNormMode mode) {
    const auto& d = input.dims();
    const bool flat = d.size() == 3;
    if (!(flat || (d.size() == 4 && d[1] == 1)) || d[d.size() - 2] != cfg.input_bins ||
        d.back() != cfg.input_frames) {
      throw ShapeError("network input must be [N," + std::to_string(cfg.input_bins) + "," +
                       std::to_string(cfg.input_frames) + "], got " + numerics::shape_str(d));
    }
    last_attention.clear();
    const std::size_t n = d[0], c = cfg.block_channels, f = cfg.input_bins;
    Tensor<T> x = flat ? numerics::reshape(input, {n, 1, f, cfg.input_frames}) : input;
    std::size_t site = 0;
    auto attend = [&](const Tensor<T>& v) {
      Tensor<T> w;
      auto out = attention.at(site++)(v, mode, &w);
      last_attention.push_back(w);
      return out;
    };

    for (const auto& b : pre) {
      x = b(x, mode);
      if (cfg.placement == Placement::pre) x = attend(x);
    }
    for (const auto& b : blocks) {
      x = b(x, mode);
      if (cfg.placement == Placement::all) x = attend(x);
    }
    for (const auto& b : post) {
      x = b(x, mode);
      if (cfg.placement == Placement::post) x = attend(x);
    }
    Tensor<T> plane = numerics::global_average_pool_time(x);  // [N,C,F]
    if (cfg.placement == Placement::final) {
      plane = numerics::reshape(attend(numerics::reshape(plane, {n, c, f, 1})), {n, c, f});
    }
    return numerics::linear(numerics::mean_trailing(plane, 1), head_w, head_b);
  }
};

template <std::floating_point T>
Network<T>::Network(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  impl_ = std::make_unique<Impl>(cfg, seed);
}

template <std::floating_point T>
Network<T>::~Network() = default;
template <std::floating_point T>
Network<T>::Network(Network&&) noexcept = default;
template <std::floating_point T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <std::floating_point T>
const ModelConfig& Network<T>::config() const {
  return impl_->cfg;
}

template <std::floating_point T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, BatchNormMode mode) {
  return impl_->forward(x, mode);
}

template <std::floating_point T>
const std::vector<std::pair<std::string, Tensor<T>>>& Network<T>::parameters() const {
  return impl_->store.parameters();
}

template <std::floating_point T>
Tensor<T> Network<T>::parameter(std::string_view name) const {
  for (const auto& [n, t] : parameters()) {
    if (n == name) return t;
  }
  throw ArgumentError("no parameter named '" + std::string(name) + "'");
}

template <std::floating_point T>
const std::vector<std::pair<std::string, BatchNormState<T>*>>& Network<T>::batch_norms() const {
  return impl_->store.batch_norms();
}

template <std::floating_point T>
std::size_t Network<T>::attention_count() const {
  return impl_->attention.size();
}

template <std::floating_point T>
const std::vector<std::string>& Network<T>::attention_sites() const {
  return impl_->sites;
}

template <std::floating_point T>
const std::vector<Tensor<T>>& Network<T>::last_attention() const {
  return impl_->last_attention;
}

template <std::floating_point T>
Footprint Network<T>::footprint() const {
  return count_footprint(impl_->cfg);
}

template class Network<float>;
template class Network<double>;

}  // namespace fcanet::model
