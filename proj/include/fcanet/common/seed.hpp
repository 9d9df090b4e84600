#pragma once

#include <cstdint>
#include <string_view>

namespace fcanet {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Stable sub-seed for (seed, purpose); independent of platform hashing.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index);

}  // namespace fcanet
