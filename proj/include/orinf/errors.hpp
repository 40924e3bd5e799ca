#pragma once

#include <stdexcept>
#include <string>

namespace orinf {

// Error taxonomy used across the library. Every failure path throws one of
// these; the CLI maps them to a diagnostic plus a non-zero exit status.

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad hyperparameters, shape mismatches, incompatible artifacts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid data handed to an operation (empty set, bad fraction, n too large).
class InputError : public Error {
 public:
  using Error::Error;
};

// Layer index outside the model's tap range.
class AccessError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training; message names the epoch.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Delimited-file problems; message carries row/column location.
class IngestError : public Error {
 public:
  using Error::Error;
};

// Corrupt or version-mismatched checkpoint bytes.
class SerializationError : public Error {
 public:
  using Error::Error;
};

// Statistically undefined request (constant correlation input,
// rank-deficient regression design).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace orinf
