#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcanet/numerics/tensor.hpp"

namespace fcanet::numerics {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  // A coordinate whose one-sided slopes differ by more than this (relative)
  // straddles a non-differentiable point such as a ReLU corner; it is
  // re-measured with steps shrunk by 100x, down to epsilon * 1e-4. 0 disables.
  double kink_tolerance = 1e-3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<tensor index>[<flat index>]" of the worst coordinate
  bool deterministic = true;
  std::size_t kinks = 0;  // coordinates re-measured at a smaller step
};

// Compares reverse-mode gradients of the scalar program `f` with central
// differences over `params`. The relative error of one coordinate is
// |analytic - numeric| / max(1, |analytic|). A program that does not
// reproduce its own value bit-exactly is reported as non-deterministic with
// an infinite error.
GradCheckResult grad_check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> params,
                           const GradCheckOptions& opts = {});

// sum(out * R) for a fixed pseudo-random R in [-1, 1]; turns a tensor-valued
// program into a scalar one with nontrivial upstream gradients.
Tensor<double> random_projection(const Tensor<double>& out, std::uint64_t seed);

}  // namespace fcanet::numerics
