#pragma once

#include <stdexcept>
#include <string>

namespace knockoff {

// Bad input or violated precondition; the CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or algorithmic failure during an otherwise valid computation;
// the CLI maps these to exit code 1.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Logistic MLE does not exist (separated data).
class SeparationError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

}  // namespace knockoff
