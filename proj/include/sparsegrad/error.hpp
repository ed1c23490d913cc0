#pragma once

#include <stdexcept>
#include <string>

namespace sparsegrad {

/// Raised when an input violates a documented precondition (bad shapes,
/// malformed configs, out-of-range hyper-parameters).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation produces or would produce a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative normalizer ran out of iterations.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double deviation)
      : NumericError(what + " (final deviation " + std::to_string(deviation) + ")"),
        deviation_(deviation) {}

  double deviation() const noexcept { return deviation_; }

 private:
  double deviation_;
};

}  // namespace sparsegrad
