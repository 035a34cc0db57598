#pragma once

#include <stdexcept>
#include <string>

namespace sgles {

// Bad arguments, malformed configuration, mismatched grids.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Blow-up, non-finite values, inconsistent numerical state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary / manifest file problems (bad magic, truncation, checksum).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgles
