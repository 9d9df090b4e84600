#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcanet/model/config.hpp"
#include "fcanet/numerics/ops.hpp"

namespace fcanet::model {

using numerics::BatchNormMode;
using numerics::BatchNormState;
using numerics::Tensor;

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::size_t macs = 0;
};

// Trainable scalars and multiply-accumulates for one [1,F,T] input.
struct Footprint {
  std::size_t params = 0;
  std::size_t macs = 0;
  std::vector<LayerCost> layers;
};

template <std::floating_point T>
class Network {
 public:
  // Weights are drawn per tensor from (seed, tensor name), so two builds with
  // the same seed agree, and variants agree on every tensor they share.
  Network(const ModelConfig& cfg, std::uint64_t seed);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const ModelConfig& config() const;

  // x: [N,F,T] or [N,1,F,T] -> logits [N,classes]. Train mode uses batch
  // statistics and updates the running ones.
  Tensor<T> forward(const Tensor<T>& x, BatchNormMode mode);

  // Trainable tensors in a fixed order. Handles share storage with the network.
  const std::vector<std::pair<std::string, Tensor<T>>>& parameters() const;
  Tensor<T> parameter(std::string_view name) const;
  const std::vector<std::pair<std::string, BatchNormState<T>*>>& batch_norms() const;

  std::size_t attention_count() const;
  const std::vector<std::string>& attention_sites() const;
  // Attention weights produced by the most recent forward, one per site.
  const std::vector<Tensor<T>>& last_attention() const;

  Footprint footprint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Network<float>;
extern template class Network<double>;

Footprint count_footprint(const ModelConfig& cfg);

}  // namespace fcanet::model
