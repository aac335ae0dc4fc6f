#pragma once

#include <stdexcept>
#include <string>

namespace raf {

/// Raised when operand extents do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on NaN/Inf inputs or a non-finite loss.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for malformed files (bad magic, short reads, inconsistent manifests).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace raf
