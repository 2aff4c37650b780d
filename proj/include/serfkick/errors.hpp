#pragma once

#include <stdexcept>

namespace serfkick {

/// Invalid configuration or arguments (CLI exit code 1).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown such as loss of positivity (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace serfkick
