#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace fcanet::data {

inline constexpr std::size_t kNumClasses = 12;
inline constexpr std::string_view kSilenceMarker = "_silence_";

// The 12-label task: ten keywords, silence, and unknown for every other
// vocabulary word. Ids follow this order.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "up", "down", "left", "right", "yes", "no", "on", "off", "go", "stop", "silence", "unknown"};

inline constexpr std::size_t kSilenceId = 10;
inline constexpr std::size_t kUnknownId = 11;

// The 35-word Speech Commands V2 vocabulary.
inline constexpr std::array<std::string_view, 35> kVocabulary = {
    "backward", "bed",   "bird", "cat",   "dog",   "down",  "eight",  "five",  "follow",
    "forward",  "four",  "go",   "happy", "house", "learn", "left",   "marvin", "nine",
    "no",       "off",   "on",   "one",   "right", "seven", "sheila", "six",   "stop",
    "three",    "tree",  "two",  "up",    "visual", "wow",  "yes",    "zero"};

bool in_vocabulary(std::string_view word);

// Class id of a vocabulary word or the silence marker. Throws DataError for
// anything else.
std::size_t build_label(std::string_view word);

std::string_view class_name(std::size_t id);

}  // namespace fcanet::data
