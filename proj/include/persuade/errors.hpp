#pragma once

#include <stdexcept>
#include <string>

namespace persuade {

/// Raised for bad input: malformed files, invalid arguments, violated
/// preconditions. The CLI maps it to exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a valid request cannot be carried out (I/O failure, a
/// non-finite loss). The CLI maps it to exit status 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace persuade
