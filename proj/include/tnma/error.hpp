#pragma once

#include <stdexcept>

namespace tnma {

/// Invalid or inconsistent input data (malformed rows, invalid networks).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown, e.g. a covariance that stays indefinite after jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments supplied by the caller.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tnma
