#pragma once

#include <stdexcept>
#include <string>

namespace subdiff {

// Invalid argument or grid (beta out of range, nonpositive step, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation failed to converge or left the representable range.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A requested physical time lies beyond the simulated operational horizon.
class HorizonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver state exceeded the blow-up threshold.
class DivergedError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Integrand outside the admissible (adapted) class.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Covariance kernel fails non-negative definiteness beyond tolerance.
class KernelError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace subdiff
