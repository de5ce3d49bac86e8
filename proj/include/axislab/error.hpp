#pragma once

#include <stdexcept>
#include <string>

namespace axislab {

// Bad inputs: malformed files, mismatched shapes, violated preconditions.
// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs were well-formed but the computation is undefined on them
// (degenerate axis, zero variance, rank deficiency, ...). Exit code 1.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline void check_computable(bool ok, const std::string& what) {
  if (!ok) throw ComputationError(what);
}

}  // namespace detail
}  // namespace axislab
