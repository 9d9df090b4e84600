#pragma once

#include <concepts>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fcanet/numerics/tensor.hpp"

namespace fcanet::train {

using numerics::Tensor;

template <std::floating_point T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <std::floating_point T>
struct OptimState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<T>> m;  // one per parameter, lazily sized
  std::vector<std::vector<T>> v;
};

// Bias-corrected Adam on every parameter's accumulated gradient. A parameter
// that received no gradient is treated as having a zero one. Throws
// NumericError naming the tensor if any gradient is NaN or infinite; nothing
// is updated in that case.
template <std::floating_point T>
void adam_step(const NamedTensors<T>& params, OptimState<T>& state, double lr);

template <std::floating_point T>
void zero_grads(const NamedTensors<T>& params);

extern template void adam_step(const NamedTensors<float>&, OptimState<float>&, double);
extern template void adam_step(const NamedTensors<double>&, OptimState<double>&, double);
extern template void zero_grads(const NamedTensors<float>&);
extern template void zero_grads(const NamedTensors<double>&);

}  // namespace fcanet::train
