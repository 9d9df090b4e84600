#include "fcanet/data/mixup.hpp"

#include <algorithm>
#include <numeric>

#include "fcanet/common/errors.hpp"

namespace fcanet::data {

MixupDraw draw_mixup(std::size_t size, double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw ArgumentError("mixup: alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  MixupDraw d;
  // Small alpha can underflow both draws to zero; redraw in that case.
  double a = 0.0, b = 0.0;
  do {
    a = gamma(rng);
    b = gamma(rng);
  } while (!(a + b > 0.0));
  d.lambda = a / (a + b);
  d.partner.resize(size);
  std::iota(d.partner.begin(), d.partner.end(), std::size_t{0});
  std::shuffle(d.partner.begin(), d.partner.end(), rng);
  return d;
}

Batch apply_mixup(const Batch& batch, const MixupDraw& draw) {
  if (draw.partner.size() != batch.size) throw ArgumentError("mixup: partner list does not match the batch");
  if (batch.features.size() != batch.size * batch.feature_size ||
      batch.label_weights.size() != batch.size * batch.classes) {
    throw ShapeError("mixup: batch buffers do not match their sizes");
  }
  const double lam = draw.lambda;
  Batch out = batch;
  auto blend = [&](const std::vector<double>& src, std::vector<double>& dst, std::size_t width) {
    for (std::size_t i = 0; i < batch.size; ++i) {
      const double* a = src.data() + i * width;
      const double* b = src.data() + draw.partner[i] * width;
      double* o = dst.data() + i * width;
      for (std::size_t k = 0; k < width; ++k) o[k] = lam * a[k] + (1.0 - lam) * b[k];
    }
  };
  blend(batch.features, out.features, batch.feature_size);
  blend(batch.label_weights, out.label_weights, batch.classes);
  return out;
}

Batch mixup(const Batch& batch, double alpha, std::mt19937_64& rng) {
  if (batch.size < 2) return batch;
  return apply_mixup(batch, draw_mixup(batch.size, alpha, rng));
}

}  // namespace fcanet::data
