#include "fcanet/train/adam.hpp"

#include <cmath>

#include "fcanet/common/errors.hpp"

namespace fcanet::train {

template <std::floating_point T>
void adam_step(const NamedTensors<T>& params, OptimState<T>& state, double lr) {
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive, got " + std::to_string(lr));
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("optimizer holds " + std::to_string(state.m.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    if (state.m[i].size() != p.numel()) throw ShapeError("optimizer moment size differs for " + name);
    if (!p.has_grad()) continue;
    for (const T g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
    }
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].second;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = p.has_grad();
    const std::span<const T> g = has ? p.grad() : std::span<const T>{};
    auto w = p.mutable_values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const T gk = has ? g[k] : T(0);
      m[k] = b1 * m[k] + (T(1) - b1) * gk;
      v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      w[k] = static_cast<T>(w[k] - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template <std::floating_point T>
void zero_grads(const NamedTensors<T>& params) {
  for (const auto& [name, p] : params) {
    Tensor<T> t = p;
    if (t.has_grad()) t.zero_grad();
  }
}

template void adam_step(const NamedTensors<float>&, OptimState<float>&, double);
template void adam_step(const NamedTensors<double>&, OptimState<double>&, double);
template void zero_grads(const NamedTensors<float>&);
template void zero_grads(const NamedTensors<double>&);

}  // namespace fcanet::train
