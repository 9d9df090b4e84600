#include "fcanet/data/curriculum.hpp"

#include "fcanet/common/errors.hpp"

namespace fcanet::data {

CurriculumStage CurriculumStage::make(std::size_t index) {
  if (index >= kNumStages) throw ArgumentError("curriculum stage index must be 0..3");
  static constexpr double kSteps[] = {0.0, -5.0, -10.0};
  CurriculumStage stage{index, {MixCondition::clean()}};
  for (std::size_t k = 0; k < index; ++k) stage.pool.push_back(MixCondition::at(kSteps[k]));
  return stage;
}

MixCondition curriculum_condition(const CurriculumStage& stage, std::mt19937_64& rng) {
  if (stage.pool.empty()) throw ArgumentError("curriculum stage has an empty pool");
  return stage.pool[std::uniform_int_distribution<std::size_t>(0, stage.pool.size() - 1)(rng)];
}

CurriculumStage stage_schedule(std::size_t epoch, const StageLengths& lengths) {
  std::size_t end = 0;
  for (std::size_t k = 0; k + 1 < kNumStages; ++k) {
    if (lengths[k] == 0) throw ArgumentError("curriculum stage lengths must be positive");
    end += lengths[k];
    if (epoch < end) return CurriculumStage::make(k);
  }
  return CurriculumStage::make(kNumStages - 1);
}

}  // namespace fcanet::data
