#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcanet/numerics/grad_check.hpp"

namespace fcanet::numerics {

struct PrimitiveCheck {
  std::string op;
  std::size_t seeds = 0;
  GradCheckResult worst;
  std::size_t kinks = 0;  // summed over seeds
};

// Finite-difference checks of every primitive on randomized small shapes,
// `seeds` draws each. One entry per primitive with its worst seed.
std::vector<PrimitiveCheck> check_primitives(std::size_t seeds, std::uint64_t base_seed = 0,
                                             double epsilon = 1e-5);

}  // namespace fcanet::numerics
