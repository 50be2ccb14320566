#pragma once

#include <stdexcept>
#include <string>

namespace lrml {

/// Raised for bad input: malformed files, invalid configs, out-of-range
/// indices supplied by a caller. The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when numerical state goes bad (non-finite gradients and the like).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lrml
