#pragma once

#include <stdexcept>
#include <string>

namespace fm {

// Error taxonomy mirrored by the CLI exit codes: config=1, data=2, numeric=3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied parameters or option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with input data content (parse failures, bound violations).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numeric failures at run time: degenerate objectives, non-convergence,
// privacy-budget overdraft.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fm
