#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace fcanet::data {

// Row-major features [size x feature_size] with soft labels [size x classes].
struct Batch {
  std::size_t size = 0;
  std::size_t feature_size = 0;
  std::size_t classes = 0;
  std::vector<double> features;
  std::vector<double> label_weights;
};

struct MixupDraw {
  double lambda = 1.0;
  std::vector<std::size_t> partner;
};

// lambda ~ Beta(alpha, alpha) from two gamma draws; partner is a uniform permutation.
MixupDraw draw_mixup(std::size_t size, double alpha, std::mt19937_64& rng);
Batch apply_mixup(const Batch& batch, const MixupDraw& draw);
// Batches of fewer than two items pass through unchanged.
Batch mixup(const Batch& batch, double alpha, std::mt19937_64& rng);

}  // namespace fcanet::data
