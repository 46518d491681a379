#pragma once

#include <stdexcept>
#include <string>

namespace dfd {

// Bad input: malformed spec/config, schema violations, shape mismatches.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures. The message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown during training (non-finite loss, non-finite statistics
// network output).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dfd
