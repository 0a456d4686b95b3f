#pragma once

#include <stdexcept>
#include <string>

namespace mctsnet {

// Shapes of two operands do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A call violated an API precondition (bad label, second backward, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf detected where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mctsnet
