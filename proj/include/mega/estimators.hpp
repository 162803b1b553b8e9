// Moment estimators and their gap. Two independent estimators of the same
// first and second moment are built: the data estimators (DE) from the
// observed sample, and the forward model estimators (FME) from latent draws
// of a fitted model via the law of total variance. Their difference is the
// moment estimators gap (MEGA); its Frobenius norms are the scalar metrics
// 1MEGA-F and 2MEGA-F. The sample estimator (SE), which averages raw moments
// of generated points, is kept as the baseline the FME is compared against.
#pragma once

#include <cstdint>
#include <optional>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/moments.hpp"
#include "mega/norms.hpp"
#include "mega/sym_matrix.hpp"

namespace mega {

/// Arithmetic mean vector of the observations.
inline Vector data_first_moment(const Dataset& s) {
  return s.rows().colwise().mean().transpose();
}

/// DE of the second moment: the n-1 sample covariance plus the outer product
/// of the mean. Requires at least two rows.
inline SymMatrix data_second_moment(const Dataset& s) {
  const Eigen::Index n = s.n();
  if (n < 2) {
    throw InvalidInputError("data_second_moment: needs n >= 2 observations");
  }
  const Vector xbar = data_first_moment(s);
  Matrix centered = s.rows().rowwise() - xbar.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return SymMatrix(cov + xbar * xbar.transpose());
}

/// FME: averages E[x|z_i] for the first moment and
/// Var[x|z_i] + E[x|z_i] E[x|z_i]^T for the second.
inline MomentPair fme_moments(const ConditionalMomentSample& cms) {
  const Eigen::Index m = cms.m();
  const Eigen::Index d = cms.dim();
  Vector first = cms.means().colwise().mean().transpose();
  Matrix second = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto mu = cms.means().row(i);
    second.noalias() += mu.transpose() * mu;
  }
  if (cms.representation() == VarianceRepr::diagonal) {
    second.diagonal() += cms.diagonal_variances().colwise().sum().transpose();
  } else {
    for (const Matrix& v : cms.full_variances()) second += v;
  }
  second /= static_cast<double>(m);
  return {first, SymMatrix(second)};
}

/// SE: raw moment averages of a generated sample (no n-1 correction).
inline MomentPair se_moments(const Dataset& x) {
  Vector first = data_first_moment(x);
  Matrix second = (x.rows().transpose() * x.rows()) / static_cast<double>(x.n());
  return {first, SymMatrix(second)};
}

struct MegaReport {
  Vector gap1;
  SymMatrix gap2;
  double mega1_f = 0.0;
  double mega2_f = 0.0;
  std::int64_t m_used = 0;
  std::optional<std::uint64_t> seed;
};

namespace detail {
inline MegaReport make_report(const Dataset& s, const MomentPair& model,
                              std::int64_t m_used, std::optional<std::uint64_t> seed) {
  if (s.dim() != model.first.size()) {
    throw InvalidInputError("compute_mega: dataset dimension " + std::to_string(s.dim()) +
                            " does not match model dimension " +
                            std::to_string(model.first.size()));
  }
  Vector gap1 = data_first_moment(s) - model.first;
  SymMatrix gap2 = data_second_moment(s) - model.second;
  const double mega1_f = vector_qnorm(gap1, 2.0);
  const double mega2_f = frobenius_norm(gap2);
  return MegaReport{std::move(gap1), std::move(gap2), mega1_f, mega2_f, m_used, seed};
}
}  // namespace detail

/// MEGA per the Monte Carlo route: DE of the dataset against the FME of the
/// supplied conditional-moment draws.
inline MegaReport compute_mega(const Dataset& s, const ConditionalMomentSample& cms) {
  return detail::make_report(s, fme_moments(cms), cms.m(), cms.seed());
}

/// MEGA against analytically exact model moments (m_used is recorded as 0).
inline MegaReport compute_mega(const Dataset& s, const MomentPair& exact_model_moments) {
  return detail::make_report(s, exact_model_moments, 0, std::nullopt);
}

}  // namespace mega
