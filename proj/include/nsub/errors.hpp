#pragma once

#include <stdexcept>
#include <string>

namespace nsub {

// Invalid user input: bad config values, dimension mismatches, malformed files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, non-convergence, non-finite results.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupt or incompatible serialized data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nsub
