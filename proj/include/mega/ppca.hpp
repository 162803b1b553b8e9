// Probabilistic PCA: z ~ N(0, I_M), x | z ~ N(Wz + b, sigma^2 I_D).
// Fitting uses the closed-form maximum-likelihood solution (leading
// eigenpairs of the 1/n sample covariance), with the rotational ambiguity
// fixed by a deterministic sign convention.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/moments.hpp"
#include "mega/rng.hpp"
#include "mega/sym_matrix.hpp"

namespace mega {

class PpcaModel {
 public:
  PpcaModel(Matrix w, Vector b, double sigma2)
      : w_(std::move(w)), b_(std::move(b)), sigma2_(sigma2) {
    if (w_.rows() < 1 || w_.cols() < 1) {
      throw InvalidInputError("PpcaModel: W must be d x M with d, M >= 1");
    }
    if (w_.cols() > w_.rows()) {
      throw InvalidInputError("PpcaModel: latent dimension M exceeds data dimension d");
    }
    if (b_.size() != w_.rows()) {
      throw InvalidInputError("PpcaModel: offset dimension does not match W");
    }
    if (!all_finite(w_) || !all_finite(b_) || !std::isfinite(sigma2_)) {
      throw InvalidInputError("PpcaModel: parameters must be finite");
    }
    if (!(sigma2_ > 0.0)) {
      throw InvalidInputError("PpcaModel: sigma2 must be > 0");
    }
  }

  Eigen::Index dim() const { return w_.rows(); }
  Eigen::Index latent_dim() const { return w_.cols(); }
  const Matrix& w() const { return w_; }
  const Vector& b() const { return b_; }
  double sigma2() const { return sigma2_; }

 private:
  Matrix w_;
  Vector b_;
  double sigma2_;
};

/// Closed-form ML fit: b = mean, sigma^2 = average of the discarded
/// eigenvalues of the 1/n covariance, W = U_M (Lambda_M - sigma^2 I)^(1/2)
/// with eigenvalues sorted descending and each eigenvector's first nonzero
/// coordinate made positive.
inline PpcaModel ppca_fit(const Dataset& s, Eigen::Index latent_dim) {
  const Eigen::Index d = s.dim();
  const Eigen::Index n = s.n();
  if (latent_dim < 1 || latent_dim >= d) {
    throw InvalidInputError("ppca_fit: need 1 <= latent_dim < d");
  }
  if (n < 2) throw InvalidInputError("ppca_fit: needs n >= 2 observations");

  const Vector xbar = data_first_moment(s);
  Matrix centered = s.rows().rowwise() - xbar.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("ppca_fit: eigendecomposition failed");
  }
  // Eigen returns ascending order; index from the top.
  const Vector evals = eig.eigenvalues();
  const Matrix evecs = eig.eigenvectors();
  const double lambda_max = evals[d - 1];

  double sigma2 = 0.0;
  for (Eigen::Index j = 0; j < d - latent_dim; ++j) sigma2 += evals[j];
  sigma2 /= static_cast<double>(d - latent_dim);
  if (!(sigma2 > lambda_max * 1e-12) || !(lambda_max > 0.0)) {
    throw NumericalError(
        "ppca_fit: sample covariance is rank deficient; it needs at least "
        "latent_dim + 1 nonzero eigenvalues");
  }

  Matrix w(d, latent_dim);
  for (Eigen::Index c = 0; c < latent_dim; ++c) {
    const Eigen::Index src = d - 1 - c;  // descending
    Vector u = evecs.col(src);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(u[i]) > 1e-12) {
        if (u[i] < 0.0) u = -u;
        break;
      }
    }
    const double excess = std::max(evals[src] - sigma2, 0.0);
    w.col(c) = u * std::sqrt(excess);
  }
  return PpcaModel(std::move(w), xbar, sigma2);
}

/// Marginal moments of N(b, WW^T + sigma^2 I): first = b,
/// second = WW^T + sigma^2 I + bb^T.
inline MomentPair ppca_exact_moments(const PpcaModel& p) {
  const Eigen::Index d = p.dim();
  Matrix second = p.w() * p.w().transpose() + p.sigma2() * Matrix::Identity(d, d) +
                  p.b() * p.b().transpose();
  return {p.b(), SymMatrix(second)};
}

/// m latent draws z_i ~ N(0, I_M); entry i has mean Wz_i + b and the
/// isotropic diagonal variance sigma^2. Deterministic given the seed.
inline ConditionalMomentSample ppca_conditional_moment_sample(const PpcaModel& p,
                                                              std::int64_t m,
                                                              std::uint64_t seed) {
  if (m < 1) throw InvalidInputError("ppca_conditional_moment_sample: m must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = p.dim();
  Matrix means(m, d);
  for (std::int64_t i = 0; i < m; ++i) {
    const Vector z = rng.normal_vector(p.latent_dim());
    means.row(i) = (p.w() * z + p.b()).transpose();
  }
  Matrix variances = Matrix::Constant(m, d, p.sigma2());
  ConditionalMomentSample cms(std::move(means), std::move(variances));
  cms.set_seed(seed);
  return cms;
}

/// Ancestral sample: z ~ N(0, I_M), then x = Wz + b + sigma * eps.
inline Dataset ppca_ancestral_sample(const PpcaModel& p, std::int64_t n,
                                     std::uint64_t seed) {
  if (n < 1) throw InvalidInputError("ppca_ancestral_sample: n must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = p.dim();
  const double sigma = std::sqrt(p.sigma2());
  Matrix rows(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    const Vector z = rng.normal_vector(p.latent_dim());
    rows.row(i) = (p.w() * z + p.b() + sigma * rng.normal_vector(d)).transpose();
  }
  return Dataset(std::move(rows));
}

}  // namespace mega
