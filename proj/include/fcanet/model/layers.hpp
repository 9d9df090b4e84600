#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "fcanet/model/config.hpp"
#include "fcanet/numerics/ops.hpp"

namespace fcanet::model {

using numerics::BatchNormMode;
using numerics::BatchNormState;
using numerics::Tensor;

// Owns every trainable tensor and BN state of a model, in creation order.
template <std::floating_point T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  // Uniform in +-1/sqrt(fan_in), drawn from (seed, name) alone.
  Tensor<T> weight(const std::string& name, numerics::Shape dims, std::size_t fan_in);
  // gamma = 1, beta = 0; registers name.gamma and name.beta as parameters.
  BatchNormState<T>* batch_norm(const std::string& name, std::size_t channels);

  const std::vector<std::pair<std::string, Tensor<T>>>& parameters() const { return params_; }
  const std::vector<std::pair<std::string, BatchNormState<T>*>>& batch_norms() const { return bns_; }

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::deque<BatchNormState<T>> bn_storage_;
  std::vector<std::pair<std::string, BatchNormState<T>*>> bns_;
};

// Depthwise [C,kH,kW] then pointwise [Co,C] with bias. Same padding.
template <std::floating_point T>
struct DwsConv {
  Tensor<T> dw, pw, pw_b;
  static DwsConv make(ParameterStore<T>& s, const std::string& name, std::size_t ci, std::size_t co, std::size_t kh,
                      std::size_t kw);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// 1D DWS along time, BN, Swish: the pre/post convolutional block.
template <std::floating_point T>
struct ConvBlock {
  DwsConv<T> conv;
  BatchNormState<T>* bn = nullptr;
  static ConvBlock make(ParameterStore<T>& s, const std::string& name, std::size_t ci, std::size_t co,
                        std::size_t kernel_t1);
  Tensor<T> operator()(const Tensor<T>& x, BatchNormMode mode) const;
};

// Linear d->h, GELU, linear h->d over the last axis.
template <std::floating_point T>
struct MixerMlp {
  Tensor<T> w1, b1, w2, b2;
  static MixerMlp make(ParameterStore<T>& s, const std::string& name, std::size_t d, std::size_t h);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Time MLP plus frequency MLP on [...,F,T], outputs summed.
template <std::floating_point T>
struct MixerLayer {
  MixerMlp<T> time, freq;
  static MixerLayer make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg);
  Tensor<T> operator()(const Tensor<T>& y) const;
};

// z = Swish(f1(Swish(f(x)))); y1 = Swish(BN(f2a(z))); y2 = Swish(BN(f2b(y1)));
// out = x + y1 + mixer(y2).
template <std::floating_point T>
struct ConvMixerBlock {
  DwsConv<T> f, f1;
  ConvBlock<T> f2a, f2b;
  MixerLayer<T> mixer;
  static ConvMixerBlock make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg);
  Tensor<T> operator()(const Tensor<T>& x, BatchNormMode mode) const;
};

// SE, ECA or C2D on x [N,C,F,T]; returns omega * x. The weights ([N,C] for
// SE/ECA, [N,C,F] for C2D) are written to `weights` when given.
template <std::floating_point T>
struct AttentionBlock {
  Attention kind = Attention::none;
  Tensor<T> w1, b1, w2, b2;   // SE
  Tensor<T> kernel;           // ECA
  Tensor<T> conv1, conv2, conv2_b;
  BatchNormState<T>* bn = nullptr;  // C2D
  static AttentionBlock make(ParameterStore<T>& s, const std::string& name, const ModelConfig& cfg,
                             std::size_t channels);
  Tensor<T> operator()(const Tensor<T>& x, BatchNormMode mode, Tensor<T>* weights = nullptr) const;
};

}  // namespace fcanet::model
