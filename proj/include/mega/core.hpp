// Common aliases and error types shared across the library.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mega {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Caller violated a documented precondition (bad shape, bad range, ...).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation failed numerically (singular matrix, rank deficiency, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be parsed or failed validation; the message carries
/// the offending line or row where one is known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace mega
