#pragma once

#include <stdexcept>
#include <string>

namespace annotagg {

/// Malformed input data or a violated precondition on data. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or configuration. CLI exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An annotator transport could not deliver any response. CLI exit code 3.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace annotagg
