#pragma once

#include <stdexcept>
#include <string>

namespace fcanet {

// Tensor dimensions do not line up for the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar or option argument is out of its valid domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data (audio, manifests, labels) is malformed or unusable.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration is invalid, incomplete, or references missing resources.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric failure during optimization (NaN/Inf gradients or parameters).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fcanet
