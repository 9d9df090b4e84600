#include "fcanet/train/plan.hpp"

#include <cmath>
#include <numbers>

#include "fcanet/common/errors.hpp"
#include "fcanet/data/mixing.hpp"

namespace fcanet::train {

std::string format(ScheduleKind k) {
  return k == ScheduleKind::step_decay ? "step_decay" : "cosine_warm_restarts";
}

void parse_value(std::string_view key, std::string_view text, ScheduleKind& out) {
  if (text == "step_decay") out = ScheduleKind::step_decay;
  else if (text == "cosine_warm_restarts") out = ScheduleKind::cosine_warm_restarts;
  else throw ConfigError("config key '" + std::string(key) + "': unknown schedule '" + std::string(text) + "'");
}

void TrainPlan::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train plan: " + what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(lr0 > 0.0, "lr0 must be positive");
  require(decay_factor > 0.0 && decay_factor <= 1.0, "decay_factor must be in (0, 1]");
  require(decay_every > 0, "decay_every must be positive");
  require(restart_period > 0 && restart_mult > 0, "restart_period and restart_mult must be positive");
  require(max_epochs > 0 && patience > 0, "max_epochs and patience must be positive");
  require(patience < max_epochs, "patience must be below max_epochs");
  require(min_delta >= 0.0, "min_delta must be nonnegative");
  for (std::size_t len : stage_lengths) require(len > 0, "stage lengths must be positive");
  require(mixup_alpha >= 0.0, "mixup_alpha must be nonnegative");
  require(max_shift_ms >= 0.0 && max_shift_ms <= 100.0, "max_shift_ms must be in [0, 100]");
  try {
    (void)data::parse_condition(val_condition);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train plan: val_condition: ") + e.what());
  }
}

double lr_at(std::size_t epoch, const TrainPlan& plan) {
  if (epoch < 1) throw ArgumentError("epochs are 1-based");
  if (plan.schedule == ScheduleKind::step_decay) {
    const std::size_t past = epoch > plan.decay_after ? epoch - plan.decay_after : 0;
    return plan.lr0 * std::pow(plan.decay_factor, static_cast<double>(past / plan.decay_every));
  }
  std::size_t t = epoch - 1, period = plan.restart_period;
  while (t >= period) {
    t -= period;
    period *= plan.restart_mult;
  }
  return plan.lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(period)));
}

}  // namespace fcanet::train
