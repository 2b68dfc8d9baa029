#pragma once

#include <stdexcept>
#include <string>

namespace tpsmooth {

// Base class for all library errors.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: bad dimensions, out-of-domain arguments, malformed
// configuration or data files. Maps to CLI exit code 1.
class validation_error : public error {
 public:
  using error::error;
};

// Numerical breakdown: factorization failure after jitter escalation,
// degenerate fits, bracket failures. Maps to CLI exit code 2.
class numerical_error : public error {
 public:
  using error::error;
};

// File system and parsing problems.
class io_error : public validation_error {
 public:
  using validation_error::validation_error;
};

}  // namespace tpsmooth
