// Moment containers: a (first, second) moment pair and the per-draw
// conditional moments E[x|z_i], Var[x|z_i] that feed the forward model
// estimator. Conditional variances come in two representations because
// encoder-style models emit per-coordinate variances while mixture models
// emit full covariances.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mega/core.hpp"
#include "mega/sym_matrix.hpp"

namespace mega {

struct MomentPair {
  Vector first;
  SymMatrix second;
};

enum class VarianceRepr { diagonal, full };

class ConditionalMomentSample {
 public:
  /// Diagonal representation: row i of `variances` holds the per-coordinate
  /// conditional variances for draw i.
  ConditionalMomentSample(Matrix means, Matrix diagonal_variances)
      : means_(std::move(means)),
        diag_(std::move(diagonal_variances)),
        repr_(VarianceRepr::diagonal) {
    validate_means();
    if (diag_.rows() != means_.rows() || diag_.cols() != means_.cols()) {
      throw InvalidInputError("ConditionalMomentSample: variance shape mismatch");
    }
    if (!all_finite(diag_) || (diag_.array() < 0.0).any()) {
      throw InvalidInputError(
          "ConditionalMomentSample: diagonal variances must be finite and >= 0");
    }
  }

  /// Full representation: one d x d covariance per draw. Inputs are
  /// symmetrized; asymmetry beyond 1e-6 or a negative diagonal is rejected.
  ConditionalMomentSample(Matrix means, std::vector<Matrix> full_variances)
      : means_(std::move(means)),
        full_(std::move(full_variances)),
        repr_(VarianceRepr::full) {
    validate_means();
    if (static_cast<Eigen::Index>(full_.size()) != means_.rows()) {
      throw InvalidInputError("ConditionalMomentSample: variance count mismatch");
    }
    const Eigen::Index d = means_.cols();
    for (std::size_t i = 0; i < full_.size(); ++i) {
      Matrix& v = full_[i];
      if (v.rows() != d || v.cols() != d) {
        throw InvalidInputError("ConditionalMomentSample: variance " +
                                std::to_string(i) + " is not " + std::to_string(d) +
                                "x" + std::to_string(d));
      }
      if (!all_finite(v)) {
        throw InvalidInputError("ConditionalMomentSample: variance " +
                                std::to_string(i) + " has non-finite entries");
      }
      if (((v - v.transpose()).array().abs() > 1e-6).any()) {
        throw InvalidInputError("ConditionalMomentSample: variance " +
                                std::to_string(i) + " asymmetric beyond 1e-6");
      }
      if ((v.diagonal().array() < 0.0).any()) {
        throw InvalidInputError("ConditionalMomentSample: variance " +
                                std::to_string(i) + " has a negative diagonal entry");
      }
      v = ((v + v.transpose()) / 2.0).eval();
    }
  }

  Eigen::Index m() const { return means_.rows(); }
  Eigen::Index dim() const { return means_.cols(); }
  VarianceRepr representation() const { return repr_; }

  const Matrix& means() const { return means_; }
  Vector mean(Eigen::Index i) const { return means_.row(i).transpose(); }

  /// Conditional variance of draw i as a full d x d matrix (diagonal
  /// representations are promoted on the fly).
  Matrix variance(Eigen::Index i) const {
    if (repr_ == VarianceRepr::diagonal) {
      return Matrix(diag_.row(i).transpose().asDiagonal());
    }
    return full_[static_cast<std::size_t>(i)];
  }

  const Matrix& diagonal_variances() const { return diag_; }
  const std::vector<Matrix>& full_variances() const { return full_; }

  /// Seed used to produce the draws, when the producer recorded one.
  std::optional<std::uint64_t> seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

 private:
  void validate_means() {
    if (means_.rows() < 1 || means_.cols() < 1) {
      throw InvalidInputError("ConditionalMomentSample: needs m >= 1 draws");
    }
    if (!all_finite(means_)) {
      throw InvalidInputError("ConditionalMomentSample: means must be finite");
    }
  }

  Matrix means_;
  Matrix diag_;
  std::vector<Matrix> full_;
  VarianceRepr repr_;
  std::optional<std::uint64_t> seed_;
};

}  // namespace mega
