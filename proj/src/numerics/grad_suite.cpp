#include "fcanet/numerics/grad_suite.hpp"

#include <functional>
#include <random>

#include "fcanet/common/seed.hpp"
#include "fcanet/numerics/ops.hpp"

namespace fcanet::numerics {

namespace {

using TensorD = Tensor<double>;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t extent(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  TensorD tensor(const Shape& dims, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(dims));
    for (double& x : v) x = dist(rng_);
    return TensorD(dims, std::move(v), true);
  }
  std::uint64_t next() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

struct Case {
  std::string name;
  // Builds inputs from the sampler and returns (program, parameters).
  std::function<std::pair<std::function<TensorD()>, std::vector<TensorD>>(Sampler&)> build;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto project = [](Sampler& s) { return s.next(); };

  cases.push_back({"depthwise_conv2d", [project](Sampler& s) {
                     const std::size_t n = s.extent(1, 2), c = s.extent(1, 3);
                     const std::size_t h = s.extent(3, 6), w = s.extent(3, 6);
                     auto x = s.tensor({n, c, h, w});
                     auto k = s.tensor({c, s.extent(1, 3), s.extent(1, 3)});
                     ConvOptions opts{s.extent(1, 2), s.extent(1, 2), s.extent(0, 1) ? Padding::same : Padding::valid};
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] {
                                        return random_projection(activation(depthwise_conv2d(x, k, opts), Activation::swish), seed);
                                      }),
                                      std::vector<TensorD>{x, k}};
                   }});
  cases.push_back({"depthwise_conv1d", [project](Sampler& s) {
                     const std::size_t n = s.extent(1, 2), c = s.extent(1, 3), l = s.extent(4, 9);
                     auto x = s.tensor({n, c, l});
                     auto k = s.tensor({c, s.extent(1, 4)});
                     const std::size_t stride = s.extent(1, 2);
                     const Padding pad = s.extent(0, 1) ? Padding::same : Padding::valid;
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] {
                                        return random_projection(depthwise_conv1d(x, k, stride, pad), seed);
                                      }),
                                      std::vector<TensorD>{x, k}};
                   }});
  cases.push_back({"conv2d", [project](Sampler& s) {
                     const std::size_t n = s.extent(1, 2), ci = s.extent(1, 3), co = s.extent(1, 3);
                     auto x = s.tensor({n, ci, s.extent(3, 5), s.extent(3, 5)});
                     auto w = s.tensor({co, ci, 3, 3});
                     auto b = s.tensor({co});
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] { return random_projection(conv2d(x, w, b), seed); }),
                                      std::vector<TensorD>{x, w, b}};
                   }});
  cases.push_back({"pointwise_conv", [project](Sampler& s) {
                     const std::size_t n = s.extent(1, 2), ci = s.extent(1, 4), co = s.extent(1, 4);
                     auto x = s.tensor({n, ci, s.extent(1, 4), s.extent(1, 4)});
                     auto w = s.tensor({co, ci});
                     auto b = s.tensor({co});
                     const auto seed = project(s);
                     return std::pair{
                         std::function<TensorD()>([=] { return random_projection(pointwise_conv(x, w, b), seed); }),
                         std::vector<TensorD>{x, w, b}};
                   }});
  for (BatchNormMode mode : {BatchNormMode::train, BatchNormMode::eval}) {
    const std::string name = mode == BatchNormMode::train ? "batch_norm_train" : "batch_norm_eval";
    cases.push_back({name, [project, mode](Sampler& s) {
                       const std::size_t n = s.extent(2, 3), c = s.extent(1, 3);
                       auto x = s.tensor({n, c, s.extent(2, 4), s.extent(2, 4)}, -2.0, 2.0);
                       auto state = std::make_shared<BatchNormState<double>>(c);
                       state->gamma = s.tensor({c}, 0.5, 1.5);
                       state->beta = s.tensor({c});
                       for (std::size_t i = 0; i < c; ++i) {
                         state->running_mean[i] = 0.1 * static_cast<double>(i);
                         state->running_var[i] = 0.5 + 0.25 * static_cast<double>(i);
                       }
                       const auto seed = project(s);
                       return std::pair{std::function<TensorD()>([=] {
                                          // Running statistics drift each call; eval mode must see fixed ones.
                                          auto snapshot = *state;
                                          return random_projection(batch_norm(x, snapshot, mode), seed);
                                        }),
                                        std::vector<TensorD>{x, state->gamma, state->beta}};
                     }});
  }
  for (Activation kind : {Activation::swish, Activation::gelu, Activation::relu, Activation::sigmoid}) {
    const char* names[] = {"swish", "gelu", "relu", "sigmoid"};
    cases.push_back({names[static_cast<int>(kind)], [project, kind](Sampler& s) {
                       auto x = s.tensor({s.extent(1, 3), s.extent(1, 8)}, -4.0, 4.0);
                       const auto seed = project(s);
                       return std::pair{
                           std::function<TensorD()>([=] { return random_projection(activation(x, kind), seed); }),
                           std::vector<TensorD>{x}};
                     }});
  }
  cases.push_back({"linear", [project](Sampler& s) {
                     const std::size_t din = s.extent(1, 5), dout = s.extent(1, 5);
                     auto x = s.tensor({s.extent(1, 3), s.extent(1, 3), din});
                     auto w = s.tensor({dout, din});
                     auto b = s.tensor({dout});
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] { return random_projection(linear(x, w, b), seed); }),
                                      std::vector<TensorD>{x, w, b}};
                   }});
  cases.push_back({"global_average_pool_time", [project](Sampler& s) {
                     auto x = s.tensor({s.extent(1, 2), s.extent(1, 3), s.extent(1, 4), s.extent(1, 6)});
                     const auto seed = project(s);
                     return std::pair{
                         std::function<TensorD()>([=] { return random_projection(global_average_pool_time(x), seed); }),
                         std::vector<TensorD>{x}};
                   }});
  cases.push_back({"mean_trailing", [project](Sampler& s) {
                     auto x = s.tensor({s.extent(1, 2), s.extent(1, 3), s.extent(1, 4), s.extent(1, 6)});
                     const auto seed = project(s);
                     return std::pair{
                         std::function<TensorD()>([=] { return random_projection(mean_trailing(x, 2), seed); }),
                         std::vector<TensorD>{x}};
                   }});
  cases.push_back({"scale_by_prefix", [project](Sampler& s) {
                     const std::size_t n = s.extent(1, 2), c = s.extent(1, 3), f = s.extent(1, 4);
                     auto x = s.tensor({n, c, f, s.extent(1, 5)});
                     auto w = s.tensor({n, c, f});
                     const auto seed = project(s);
                     return std::pair{
                         std::function<TensorD()>([=] { return random_projection(scale_by_prefix(x, w), seed); }),
                         std::vector<TensorD>{x, w}};
                   }});
  cases.push_back({"softmax_cross_entropy", [](Sampler& s) {
                     const std::size_t n = s.extent(1, 4), k = s.extent(2, 12);
                     auto z = s.tensor({n, k}, -3.0, 3.0);
                     std::vector<double> w(n * k, 0.0);
                     std::vector<std::size_t> a(n), b(n);
                     for (std::size_t r = 0; r < n; ++r) {
                       const double lam = static_cast<double>(s.extent(0, 100)) / 100.0;
                       w[r * k + s.extent(0, k - 1)] += lam;
                       w[r * k + s.extent(0, k - 1)] += 1.0 - lam;
                     }
                     TensorD weights({n, k}, std::move(w));
                     return std::pair{std::function<TensorD()>([=] { return softmax_cross_entropy(z, weights); }),
                                      std::vector<TensorD>{z}};
                   }});
  cases.push_back({"add_mul", [project](Sampler& s) {
                     const Shape dims{s.extent(1, 3), s.extent(1, 4)};
                     auto a = s.tensor(dims);
                     auto b = s.tensor(dims);
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] {
                                        return random_projection(add(mul(a, b), scale(a, 0.5)), seed);
                                      }),
                                      std::vector<TensorD>{a, b}};
                   }});
  cases.push_back({"reshape_swap", [project](Sampler& s) {
                     auto x = s.tensor({s.extent(1, 2), s.extent(1, 3), s.extent(1, 4)});
                     const auto seed = project(s);
                     return std::pair{std::function<TensorD()>([=] {
                                        auto y = swap_last_axes(x);
                                        return random_projection(reshape(y, {y.numel()}), seed);
                                      }),
                                      std::vector<TensorD>{x}};
                   }});
  return cases;
}

}  // namespace

std::vector<PrimitiveCheck> check_primitives(std::size_t seeds, std::uint64_t base_seed, double epsilon) {
  std::vector<PrimitiveCheck> report;
  for (const Case& c : primitive_cases()) {
    PrimitiveCheck check{c.name, seeds, {}};
    for (std::size_t i = 0; i < seeds; ++i) {
      Sampler sampler(derive_seed(base_seed, c.name, i));
      auto [program, params] = c.build(sampler);
      GradCheckOptions opts;
      opts.epsilon = epsilon;
      opts.seed = i;
      const GradCheckResult r = grad_check(program, params, opts);
      check.kinks += r.kinks;
      if (!r.deterministic || r.max_rel_error > check.worst.max_rel_error) check.worst = r;
    }
    report.push_back(std::move(check));
  }
  return report;
}

}  // namespace fcanet::numerics
