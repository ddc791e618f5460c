#pragma once

#include <stdexcept>
#include <string>

namespace disrep {

/// Caller passed an out-of-range index, a mismatched shape or similar.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A network or run configuration that cannot be realized.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed container bytes (IDX files, checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint whose manifest does not match what the caller expects.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Labeled-subset quota that the dataset cannot satisfy.
class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value detected in a forward pass, loss or gradient.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace disrep
