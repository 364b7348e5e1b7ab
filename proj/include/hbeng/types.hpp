#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hbeng {

using Real = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all solver-suite errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The MDFT matrix has linearly dependent columns (aliased harmonics).
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// A model evaluation produced NaN or infinity.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Sampling grid below the Nyquist guardrail without an explicit override.
class GridError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector/matrix sizes between operators and coefficient tables.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace hbeng
