#pragma once

#include <stdexcept>
#include <string>

namespace mvgf {

/// Raised when inputs violate an operation's preconditions (bad parameters,
/// mismatched grids, unknown model family). Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical procedure fails (blow-up, non-convergence,
/// positivity loss, divergent integral). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mvgf
