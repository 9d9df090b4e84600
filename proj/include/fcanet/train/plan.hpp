#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "fcanet/common/kv.hpp"
#include "fcanet/data/curriculum.hpp"

namespace fcanet::train {

enum class ScheduleKind { step_decay, cosine_warm_restarts };

std::string format(ScheduleKind k);
void parse_value(std::string_view key, std::string_view text, ScheduleKind& out);

struct TrainPlan {
  std::size_t batch_size = 128;
  double lr0 = 0.005;
  ScheduleKind schedule = ScheduleKind::step_decay;
  double decay_factor = 0.85;
  std::size_t decay_every = 4;
  std::size_t decay_after = 5;
  std::size_t restart_period = 10;  // first cosine cycle, in epochs
  std::size_t restart_mult = 2;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double min_delta = 1e-6;
  data::StageLengths stage_lengths{10, 10, 10, 10};
  double mixup_alpha = 0.2;
  double max_shift_ms = 100.0;
  std::size_t max_mask_width = 25;
  // "clean" or an SNR in dB; validation audio is mixed once per clip from the seed.
  std::string val_condition = "clean";
  std::uint64_t seed = 0;  // not a key: runs carry one top-level seed

  // Throws ConfigError.
  void validate() const;

  template <class Self, class V>
  static void fields(Self& p, V&& v) {
    v("batch_size", p.batch_size);
    v("lr0", p.lr0);
    v("schedule", p.schedule);
    v("decay_factor", p.decay_factor);
    v("decay_every", p.decay_every);
    v("decay_after", p.decay_after);
    v("restart_period", p.restart_period);
    v("restart_mult", p.restart_mult);
    v("max_epochs", p.max_epochs);
    v("patience", p.patience);
    v("min_delta", p.min_delta);
    v("stage_lengths", p.stage_lengths);
    v("mixup_alpha", p.mixup_alpha);
    v("max_shift_ms", p.max_shift_ms);
    v("max_mask_width", p.max_mask_width);
    v("val_condition", p.val_condition);
  }

  friend bool operator==(const TrainPlan&, const TrainPlan&) = default;
};

// Epochs are 1-based. Step decay: lr0 * factor^floor(max(0, epoch - decay_after) / decay_every).
// Cosine warm restarts: lr0 * (1 + cos(pi * t / period)) / 2 within each
// cycle, the first lasting restart_period epochs and each next one
// restart_mult times longer.
double lr_at(std::size_t epoch, const TrainPlan& plan);

}  // namespace fcanet::train
