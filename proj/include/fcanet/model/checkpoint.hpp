#pragma once

#include <concepts>
#include <filesystem>
#include <string>

#include "fcanet/model/network.hpp"

namespace fcanet::model {

// "FCAN", version, tensor count, then per tensor name/rank/dims/f32 values
// (all little-endian). Trainable tensors come first in network order, then
// BN running statistics; a length-prefixed key=value ModelConfig block closes
// the file.
template <std::floating_point T>
std::string serialize_checkpoint(const Network<T>& net);

// Overwrites weights and running statistics. Throws ConfigError when the
// stored config or any tensor shape differs from the network's.
template <std::floating_point T>
void restore_checkpoint(Network<T>& net, const std::string& bytes);

ModelConfig checkpoint_config(const std::string& bytes);

template <std::floating_point T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path);

// Builds a network from the stored config and loads every tensor.
template <std::floating_point T>
Network<T> load_checkpoint(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace fcanet::model
