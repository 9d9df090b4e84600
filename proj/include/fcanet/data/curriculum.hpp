#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "fcanet/data/mixing.hpp"

namespace fcanet::data {

inline constexpr std::size_t kNumStages = 4;

struct CurriculumStage {
  std::size_t index = 0;
  std::vector<MixCondition> pool;

  // Stage k adds the next harder SNR: [clean], [clean,0], [clean,0,-5], [clean,0,-5,-10].
  static CurriculumStage make(std::size_t index);
};

MixCondition curriculum_condition(const CurriculumStage& stage, std::mt19937_64& rng);

// Epochs are 0-based. The last length only marks the start of the final
// stage, which then runs for the remainder of training.
using StageLengths = std::array<std::size_t, kNumStages>;
CurriculumStage stage_schedule(std::size_t epoch, const StageLengths& lengths);

}  // namespace fcanet::data
