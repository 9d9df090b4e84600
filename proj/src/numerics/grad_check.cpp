#include "fcanet/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fcanet/common/errors.hpp"
#include "fcanet/numerics/ops.hpp"

namespace fcanet::numerics {

GradCheckResult grad_check(const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> params,
                           const GradCheckOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be positive");
  GradCheckResult result;

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor<double> loss = f();
  if (loss.numel() != 1) throw ArgumentError("grad_check: program must return a scalar");
  const double base = loss.item();
  loss.backward();

  {
    NoGradGuard no_grad;
    if (f().item() != base) {
      result.deterministic = false;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      return result;
    }
  }

  std::mt19937_64 rng(opts.seed);
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<double>& p = params[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_tensor != 0 && coords.size() > opts.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      auto values = p.mutable_values();
      const double saved = values[idx];
      // Central difference plus the gap between the two one-sided slopes,
      // which is eps*|f''| on smooth stretches and O(1) across a kink.
      auto probe = [&](double eps, double& gap) {
        values[idx] = saved + eps;
        const double plus = f().item();
        values[idx] = saved - eps;
        const double minus = f().item();
        values[idx] = saved;
        gap = std::abs(plus - 2.0 * base + minus) / eps;
        return (plus - minus) / (2.0 * eps);
      };
      double gap = 0.0;
      double numeric = probe(opts.epsilon, gap);
      if (opts.kink_tolerance > 0.0 && gap > opts.kink_tolerance * std::max(1.0, std::abs(numeric))) {
        ++result.kinks;
        for (double eps = opts.epsilon / 100.0; eps >= opts.epsilon * 1e-4; eps /= 100.0) {
          numeric = probe(eps, gap);
          if (gap <= opts.kink_tolerance * std::max(1.0, std::abs(numeric))) break;
        }
      }

      const double a = analytic.empty() ? 0.0 : analytic[idx];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.coordinates;
      if (!(err <= result.max_rel_error)) {
        result.max_rel_error = err;
        result.worst = std::to_string(pi) + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return result;
}

Tensor<double> random_projection(const Tensor<double>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> r(out.numel());
  for (double& v : r) v = dist(rng);
  return sum(mul(out, Tensor<double>(out.dims(), std::move(r))));
}

}  // namespace fcanet::numerics
