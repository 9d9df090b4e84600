#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcanet/model/config.hpp"
#include "fcanet/numerics/grad_check.hpp"

namespace fcanet::model {

struct VariantCheck {
  Attention attention = Attention::none;
  Placement placement = Placement::none;
  std::string name;  // e.g. "c2d-all"
  numerics::GradCheckResult result;
};

// B=2, C_blk=8, F=8, T=12 with 3-wide kernels.
ModelConfig tiny_config(Attention attention, Placement placement);

// Full forward (train-mode BN) + cross-entropy gradient check of the tiny
// network for every attention kind x placement, through weights and input.
std::vector<VariantCheck> check_model_variants(std::uint64_t seed = 0, double epsilon = 1e-5,
                                               std::size_t max_coords_per_tensor = 0);

}  // namespace fcanet::model
