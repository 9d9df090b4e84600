#include "fcanet/model/layers.hpp"

#include <cmath>
#include <random>

#include "fcanet/common/seed.hpp"

namespace fcanet::model {

using numerics::Activation;

namespace {

template <std::floating_point T>
Tensor<T> swish(const Tensor<T>& x) {
  return numerics::activation(x, Activation::swish);
}

}  // namespace

template <std::floating_point T>
Tensor<T> ParameterStore<T>::weight(const std::string& name, numerics::Shape dims, std::size_t fan_in) {
  std::mt19937_64 rng(derive_seed(seed_, "init:" + name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<T> v(numerics::shape_numel(dims));
  for (T& x : v) x = static_cast<T>(u(rng));
  Tensor<T> t(std::move(dims), std::move(v), true);
  params_.emplace_back(name, t);
  return t;
}

template <std::floating_point T>
BatchNormState<T>* ParameterStore<T>::batch_norm(const std::string& name, std::size_t channels) {
  BatchNormState<T>& bn = bn_storage_.emplace_back(channels);
  params_.emplace_back(name + ".gamma", bn.gamma);
  params_.emplace_back(name + ".beta", bn.beta);
  bns_.emplace_back(name, &bn);
  return &bn;
}

template <std::floating_point T>
DwsConv<T> DwsConv<T>::make(ParameterStore<T>& s, const std::string& name, std::size_t ci, std::size_t co,
                            std::size_t kh, std::size_t kw) {
  return {s.weight(name + ".dw", {ci, kh, kw}, kh * kw), s.weight(name + ".pw", {co, ci}, ci),
          s.weight(name + ".pw_b", {co}, ci)};
}

template <std::floating_point T>
Tensor<T> DwsConv<T>::operator()(const Tensor<T>& x) const {
  return numerics::pointwise_conv(numerics::depthwise_conv2d(x, dw), pw, pw_b);
}

template <std::floating_point T>
ConvBlock<T> ConvBlock<T>::make(ParameterStore<T>& s, const std::string& name, std::size_t ci, std::size_t co,
                                std::size_t kernel_t1) {
  ConvBlock blk{DwsConv<T>::make(s, name, ci, co, 1, kernel_t1), nullptr};
  blk.bn = s.batch_norm(name + ".bn", co);
  return blk;
}

template <std::floating_point T>
Tensor<T> ConvBlock<T>::operator()(const Tensor<T>& x, BatchNormMode mode) const {
  return swish(numerics::batch_norm(conv(x), *bn, mode));
}

template <std::floating_point T>
MixerMlp<T> MixerMlp<T>::make(ParameterStore<T>& s, const std::string& name, std::size_t d, std::size_t h) {
  return {s.weight(name + ".w1", {h, d}, d), s.weight(name + ".b1", {h}, d), s.weight(name + ".w2", {d, h}, h),
          s.weight(name + ".b2", {d}, h)};
}

template <std::floating_point T>
Tensor<T> MixerMlp<T>::operator()(const Tensor<T>& x) const {
  const auto h = numerics::activation(numerics::linear(x, w1, b1), Activation::gelu);
  return numerics::linear(h, w2, b2);
}

template <std::floating_point T>
MixerLayer<T> MixerLayer<T>::make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg) {
  return {MixerMlp<T>::make(s, name + ".mix_t", cfg.input_frames, cfg.mix_hidden_time()),
          MixerMlp<T>::make(s, name + ".mix_f", cfg.input_bins, cfg.mix_hidden_freq())};
}

template <std::floating_point T>
Tensor<T> MixerLayer<T>::operator()(const Tensor<T>& y) const {
  const auto across_freq = numerics::swap_last_axes(freq(numerics::swap_last_axes(y)));
  return numerics::add(time(y), across_freq);
}

template <std::floating_point T>
ConvMixerBlock<T> ConvMixerBlock<T>::make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg) {
  const std::size_t c = cfg.block_channels;
  ConvMixerBlock blk;
  blk.f = DwsConv<T>::make(s, name + ".f", c, c, cfg.kernel_f, cfg.kernel_t);
  blk.f1 = DwsConv<T>::make(s, name + ".f1", c, c, cfg.kernel_f, cfg.kernel_t);
  blk.f2a = ConvBlock<T>::make(s, name + ".f2a", c, c, cfg.kernel_t1);
  blk.f2b = ConvBlock<T>::make(s, name + ".f2b", c, c, cfg.kernel_t1);
  blk.mixer = MixerLayer<T>::make(s, name, cfg);
  return blk;
}

template <std::floating_point T>
Tensor<T> ConvMixerBlock<T>::operator()(const Tensor<T>& x, BatchNormMode mode) const {
  const auto z = swish(f1(swish(f(x))));
  const auto y1 = f2a(z, mode);
  const auto y2 = f2b(y1, mode);
  return numerics::add(numerics::add(x, y1), mixer(y2));
}

template <std::floating_point T>
AttentionBlock<T> AttentionBlock<T>::make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg,
                                          std::size_t channels) {
  AttentionBlock a;
  a.kind = cfg.attention;
  switch (cfg.attention) {
    case Attention::none: break;
    case Attention::se: {
      const std::size_t h = cfg.se_hidden(channels);
      a.w1 = s.weight(name + ".w1", {h, channels}, channels);
      a.b1 = s.weight(name + ".b1", {h}, channels);
      a.w2 = s.weight(name + ".w2", {channels, h}, h);
      a.b2 = s.weight(name + ".b2", {channels}, h);
      break;
    }
    case Attention::eca: {
      const std::size_t k = eca_kernel_size(channels);
      a.kernel = s.weight(name + ".kernel", {1, k}, k);
      break;
    }
    case Attention::c2d: {
      const std::size_t m = cfg.c2d_mid;
      a.conv1 = s.weight(name + ".conv1", {m, 1, 3, 3}, 9);
      a.bn = s.batch_norm(name + ".bn", m);
      a.conv2 = s.weight(name + ".conv2", {1, m, 3, 3}, 9 * m);
      a.conv2_b = s.weight(name + ".conv2_b", {1}, 9 * m);
      break;
    }
  }
  return a;
}

template <std::floating_point T>
Tensor<T> AttentionBlock<T>::operator()(const Tensor<T>& x, BatchNormMode mode, Tensor<T>* weights) const {
  if (kind == Attention::none) return x;
  const std::size_t n = x.dim(0), c = x.dim(1), f = x.dim(2);
  Tensor<T> w;
  if (kind == Attention::se) {
    const auto squeeze = numerics::mean_trailing(x, 2);
    const auto h = numerics::activation(numerics::linear(squeeze, w1, b1), Activation::relu);
    w = numerics::activation(numerics::linear(h, w2, b2), Activation::sigmoid);
  } else if (kind == Attention::eca) {
    const auto squeeze = numerics::reshape(numerics::mean_trailing(x, 2), {n, 1, c});
    w = numerics::activation(numerics::reshape(numerics::depthwise_conv1d(squeeze, kernel), {n, c}),
                             Activation::sigmoid);
  } else {
    const auto plane = numerics::reshape(numerics::global_average_pool_time(x), {n, 1, c, f});
    auto h = numerics::conv2d(plane, conv1, Tensor<T>{});
    h = numerics::activation(numerics::batch_norm(h, *bn, mode), Activation::relu);
    h = numerics::conv2d(h, conv2, conv2_b);
    w = numerics::reshape(numerics::activation(h, Activation::sigmoid), {n, c, f});
  }
  if (weights) *weights = w;
  return numerics::scale_by_prefix(x, w);
}

#define FCANET_LAYERS(T)            \
  template class ParameterStore<T>; \
  template struct DwsConv<T>;       \
  template struct ConvBlock<T>;     \
  template struct MixerMlp<T>;      \
  template struct MixerLayer<T>;    \
  template struct ConvMixerBlock<T>; \
  template struct AttentionBlock<T>;

FCANET_LAYERS(float)
FCANET_LAYERS(double)

}  // namespace fcanet::model
