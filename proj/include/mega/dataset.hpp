#pragma once

#include <utility>

#include "mega/core.hpp"

namespace mega {

/// N observations of a D-dimensional real vector, stored row-wise.
/// A single row is accepted so that generated samples can be arbitrarily
/// small; operations that need more rows (the n-1 covariance) check at the
/// call site.
class Dataset {
 public:
  explicit Dataset(Matrix rows) : rows_(std::move(rows)) {
    if (rows_.rows() < 1 || rows_.cols() < 1) {
      throw InvalidInputError("Dataset: needs at least one row and one column");
    }
    if (!all_finite(rows_)) {
      throw InvalidInputError("Dataset: entries must be finite");
    }
  }

  Eigen::Index n() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }
  Vector row(Eigen::Index i) const { return rows_.row(i).transpose(); }

 private:
  Matrix rows_;
};

}  // namespace mega
