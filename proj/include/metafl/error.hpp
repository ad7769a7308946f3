#pragma once

#include <stdexcept>
#include <string>

namespace metafl {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition (shape mismatch, empty cohort, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input data (CSV files).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, solver divergence, broken simplex invariants.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace metafl
