#pragma once

#include <stdexcept>
#include <string>

namespace asyncq {

// Validation failures (bad input shapes, malformed configs, unmet
// preconditions). Mapped to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ScheduleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Chain is not irreducible/aperiodic, detected operationally.
class ErgodicityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Requested accuracy is below what a bound can reach within the search cap.
class UnattainableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A fit window in which the error is exactly zero.
class DegenerateFitError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A runtime almost-sure invariant failed. Exit code 3.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace asyncq
