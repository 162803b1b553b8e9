#pragma once

#include <utility>

#include "mega/core.hpp"

namespace mega {

/// A square symmetric real matrix. Construction symmetrizes the input as
/// (M + M^T)/2, so matrices that are symmetric only up to floating-point
/// error (moment gaps, accumulated sums) are accepted; inputs that are
/// asymmetric beyond 1e-9 are rejected.
class SymMatrix {
 public:
  explicit SymMatrix(Matrix m) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
      throw InvalidInputError("SymMatrix: matrix must be square and nonempty");
    }
    if (!all_finite(m)) {
      throw InvalidInputError("SymMatrix: entries must be finite");
    }
    if (((m - m.transpose()).array().abs() > 1e-9).any()) {
      throw InvalidInputError("SymMatrix: asymmetry exceeds 1e-9");
    }
    m_ = ((m + m.transpose()) / 2.0).eval();
  }

  static SymMatrix identity(Eigen::Index d) { return SymMatrix(Matrix::Identity(d, d)); }
  static SymMatrix zero(Eigen::Index d) { return SymMatrix(Matrix::Zero(d, d)); }

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Matrix& mat() const { return m_; }

  SymMatrix operator+(const SymMatrix& o) const { return SymMatrix(m_ + o.m_); }
  SymMatrix operator-(const SymMatrix& o) const { return SymMatrix(m_ - o.m_); }
  SymMatrix operator*(double c) const { return SymMatrix(m_ * c); }

  bool operator==(const SymMatrix& o) const { return m_ == o.m_; }

 private:
  Matrix m_;
};

inline SymMatrix operator*(double c, const SymMatrix& m) { return m * c; }

}  // namespace mega
