#pragma once

#include <stdexcept>
#include <string>

namespace agscl {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: inconsistent layer chain, out-of-range hyperparameter, bad partition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid data: labels out of range, empty datasets, negative activation means.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (IDX headers, truncation, checkpoint layout).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Checkpoint failed its embedded checksum or carries an unknown version.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite gradients or parameters.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Unknown node, task head or similar key.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// API misuse that does not fit any other category (e.g. reading A_ij with j > i).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace agscl
