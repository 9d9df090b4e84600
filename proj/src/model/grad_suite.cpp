#include "fcanet/model/grad_suite.hpp"

#include <random>

#include "fcanet/common/seed.hpp"
#include "fcanet/model/network.hpp"

namespace fcanet::model {

ModelConfig tiny_config(Attention attention, Placement placement) {
  ModelConfig c;
  c.input_bins = 8;
  c.input_frames = 12;
  c.blocks = 2;
  c.block_channels = 8;
  c.stem_channels = 8;
  c.kernel_f = 3;
  c.kernel_t = 3;
  c.kernel_t1 = 3;
  c.attention = attention;
  c.placement = placement;
  return c;
}

std::vector<VariantCheck> check_model_variants(std::uint64_t seed, double epsilon, std::size_t max_coords_per_tensor) {
  std::vector<VariantCheck> out;
  for (Attention a : {Attention::se, Attention::eca, Attention::c2d}) {
    for (Placement p : {Placement::pre, Placement::post, Placement::all, Placement::final}) {
      VariantCheck check{a, p, format(a) + "-" + format(p), {}};
      const std::uint64_t s = derive_seed(seed, "variant:" + check.name);
      const ModelConfig cfg = tiny_config(a, p);
      Network<double> net(cfg, s);

      std::mt19937_64 rng(derive_seed(s, "batch"));
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const std::size_t n = 3;
      std::vector<double> xv(n * cfg.input_bins * cfg.input_frames);
      for (double& v : xv) v = u(rng);
      Tensor<double> x({n, cfg.input_bins, cfg.input_frames}, std::move(xv), true);
      std::vector<std::size_t> labels(n);
      for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, cfg.classes - 1)(rng);

      std::vector<Tensor<double>> params{x};
      for (const auto& [name, t] : net.parameters()) params.push_back(t);
      auto program = [&] { return numerics::softmax_cross_entropy(net.forward(x, BatchNormMode::train), labels); };
      check.result = numerics::grad_check(program, params, {epsilon, max_coords_per_tensor, s});
      out.push_back(std::move(check));
    }
  }
  return out;
}

}  // namespace fcanet::model
