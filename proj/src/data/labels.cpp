#include "fcanet/data/labels.hpp"

#include <algorithm>

#include "fcanet/common/errors.hpp"

namespace fcanet::data {

bool in_vocabulary(std::string_view word) {
  return std::find(kVocabulary.begin(), kVocabulary.end(), word) != kVocabulary.end();
}

std::size_t build_label(std::string_view word) {
  if (word == kSilenceMarker) return kSilenceId;
  if (!in_vocabulary(word)) throw DataError("unknown word '" + std::string(word) + "'");
  // Only the ten keywords come before silence in the class list.
  for (std::size_t id = 0; id < kSilenceId; ++id) {
    if (kClassNames[id] == word) return id;
  }
  return kUnknownId;
}

std::string_view class_name(std::size_t id) {
  if (id >= kNumClasses) throw ArgumentError("class id out of range");
  return kClassNames[id];
}

}  // namespace fcanet::data
