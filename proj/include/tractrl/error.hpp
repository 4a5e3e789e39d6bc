#pragma once

#include <stdexcept>
#include <string>

namespace tractrl {

// Bad caller input (preconditions, malformed specs, unknown config keys).
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid input that degenerates (e.g. zero-length polyline).
class DegenerateInput : public InvalidInput {
 public:
  explicit DegenerateInput(const std::string& msg) : InvalidInput(msg) {}
};

// Tensor shape mismatch; message names both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// On-disk format violations; message names expected/actual.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf detected where finite values are required.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tractrl
