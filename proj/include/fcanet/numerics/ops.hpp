#pragma once

#include <cstddef>
#include <vector>

#include "fcanet/numerics/tensor.hpp"

namespace fcanet::numerics {

enum class Padding { same, valid };
enum class Activation { swish, gelu, relu, sigmoid };
enum class BatchNormMode { train, eval };

struct ConvOptions {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  Padding padding = Padding::same;
};

// Output extent and leading pad along one axis. "same" pads symmetrically,
// the odd extra element going to the high-index side.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_lo = 0;
};
AxisGeometry conv_axis(std::size_t length, std::size_t kernel, std::size_t stride, Padding padding);

// Per-channel scale/shift and running statistics for batch normalization.
template <std::floating_point T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T epsilon = T(1e-5);
  T momentum = T(0.1);

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels);
  std::size_t channels() const { return running_mean.size(); }
};

// Elementwise.
template <std::floating_point T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <std::floating_point T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <std::floating_point T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <std::floating_point T> Tensor<T> activation(const Tensor<T>& x, Activation kind);

// Reductions to a scalar of shape [1].
template <std::floating_point T> Tensor<T> sum(const Tensor<T>& a);
template <std::floating_point T> Tensor<T> mean(const Tensor<T>& a);

// Shape manipulation.
template <std::floating_point T> Tensor<T> reshape(const Tensor<T>& a, const Shape& dims);
template <std::floating_point T> Tensor<T> swap_last_axes(const Tensor<T>& a);

// x: [N,C,H,W] or [C,H,W]; kernel: [C,kH,kW]. Cross-correlation, no bias.
template <std::floating_point T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel, ConvOptions opts = {});

// x: [N,C,L] or [C,L]; kernel: [C,k].
template <std::floating_point T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride = 1,
                           Padding padding = Padding::same);

// Dense 2-D convolution. x: [N,Ci,H,W]; weight: [Co,Ci,kH,kW]; bias: [Co] or undefined.
template <std::floating_point T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvOptions opts = {});

// 1x1 channel mix. x: [N,Ci,...]; weights: [Co,Ci]; bias: [Co] or undefined.
template <std::floating_point T>
Tensor<T> pointwise_conv(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

// x: [N,C,...]. Train mode normalizes with the biased batch variance over
// every non-channel axis and updates the running statistics.
template <std::floating_point T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, BatchNormMode mode);

// Affine map over the last axis. x: [...,Din]; w: [Dout,Din]; b: [Dout] or undefined.
template <std::floating_point T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// Mean over the last `axes` axes: [..., A, B] -> [...].
template <std::floating_point T>
Tensor<T> mean_trailing(const Tensor<T>& x, std::size_t axes);

// Mean over the time (last) axis: [...,F,T] -> [...,F].
template <std::floating_point T>
Tensor<T> global_average_pool_time(const Tensor<T>& x);

// x * w where w's dims are a leading prefix of x's dims; w broadcasts over
// the remaining trailing axes.
template <std::floating_point T>
Tensor<T> scale_by_prefix(const Tensor<T>& x, const Tensor<T>& w);

// Mean over rows of -sum_k w_k log softmax(logits)_k. logits: [N,K];
// weights: [N,K] with rows summing to 1 (hard labels are one-hot rows).
template <std::floating_point T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const Tensor<T>& weights);
template <std::floating_point T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& targets);

// One-hot rows for `targets` over `classes`.
template <std::floating_point T>
Tensor<T> one_hot(const std::vector<std::size_t>& targets, std::size_t classes);

// Scalar activations shared with feature code and tests.
double sigmoid(double v);

}  // namespace fcanet::numerics
