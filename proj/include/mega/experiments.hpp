// Estimator-accuracy experiments: the FME-vs-SE gap study over the Monte
// Carlo budget m, and the replicated variance comparison between the two
// estimators. The SE sample shares its latent draws with the FME of the same
// seed (it then samples emissions on top), so a seed pins down both
// estimators and the comparison is paired.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/gmm.hpp"
#include "mega/io.hpp"
#include "mega/ppca.hpp"
#include "mega/rng.hpp"

namespace mega {

inline MomentPair exact_moments(const AnyModel& model) {
  if (const auto* g = std::get_if<GmmModel>(&model)) return gmm_exact_moments(*g);
  return ppca_exact_moments(std::get<PpcaModel>(model));
}

inline ConditionalMomentSample conditional_moment_sample(const AnyModel& model,
                                                         std::int64_t m,
                                                         std::uint64_t seed) {
  if (const auto* g = std::get_if<GmmModel>(&model)) {
    return gmm_conditional_moment_sample(*g, m, seed);
  }
  return ppca_conditional_moment_sample(std::get<PpcaModel>(model), m, seed);
}

inline Dataset ancestral_sample(const AnyModel& model, std::int64_t n,
                                std::uint64_t seed) {
  if (const auto* g = std::get_if<GmmModel>(&model)) {
    return gmm_ancestral_sample(*g, n, seed);
  }
  return ppca_ancestral_sample(std::get<PpcaModel>(model), n, seed);
}

inline Eigen::Index model_dim(const AnyModel& model) {
  if (const auto* g = std::get_if<GmmModel>(&model)) return g->dim();
  return std::get<PpcaModel>(model).dim();
}

struct PairedDraw {
  ConditionalMomentSample cms;  // identical to conditional_moment_sample(model, m, seed)
  Dataset sample;               // emission draws on the same latent sequence
};

/// Draw the latent sequence once, then reuse it for both estimators: the FME
/// consumes the conditional moments directly and the SE samples one emission
/// per latent draw.
inline PairedDraw paired_fme_se_draw(const GmmModel& g, std::int64_t m,
                                     std::uint64_t seed) {
  if (m < 1) throw InvalidInputError("paired_fme_se_draw: m must be >= 1");
  const Eigen::Index d = g.dim();
  Rng rng(seed);
  std::vector<Eigen::Index> z(static_cast<std::size_t>(m));
  for (auto& zi : z) zi = rng.categorical(g.weights());

  Matrix means(m, d);
  std::vector<Matrix> variances;
  variances.reserve(z.size());
  Matrix rows(m, d);
  for (std::int64_t i = 0; i < m; ++i) {
    const Eigen::Index zi = z[static_cast<std::size_t>(i)];
    means.row(i) = g.mean(zi).transpose();
    variances.push_back(g.covariance(zi));
    rows.row(i) =
        (g.mean(zi) + g.cholesky(zi).matrixL() * rng.normal_vector(d)).transpose();
  }
  ConditionalMomentSample cms(std::move(means), std::move(variances));
  cms.set_seed(seed);
  return {std::move(cms), Dataset(std::move(rows))};
}

inline PairedDraw paired_fme_se_draw(const PpcaModel& p, std::int64_t m,
                                     std::uint64_t seed) {
  if (m < 1) throw InvalidInputError("paired_fme_se_draw: m must be >= 1");
  const Eigen::Index d = p.dim();
  Rng rng(seed);
  Matrix zs(m, p.latent_dim());
  for (std::int64_t i = 0; i < m; ++i) zs.row(i) = rng.normal_vector(p.latent_dim()).transpose();

  Matrix means(m, d);
  Matrix rows(m, d);
  const double sigma = std::sqrt(p.sigma2());
  for (std::int64_t i = 0; i < m; ++i) {
    const Vector mu = p.w() * zs.row(i).transpose() + p.b();
    means.row(i) = mu.transpose();
    rows.row(i) = (mu + sigma * rng.normal_vector(d)).transpose();
  }
  ConditionalMomentSample cms(std::move(means), Matrix::Constant(m, d, p.sigma2()));
  cms.set_seed(seed);
  return {std::move(cms), Dataset(std::move(rows))};
}

inline PairedDraw paired_fme_se_draw(const AnyModel& model, std::int64_t m,
                                     std::uint64_t seed) {
  if (const auto* g = std::get_if<GmmModel>(&model)) return paired_fme_se_draw(*g, m, seed);
  return paired_fme_se_draw(std::get<PpcaModel>(model), m, seed);
}

// ---------------------------------------------------------------------------
// Gap study: || estimator_2 - exact_2 ||_F against m, replicated over seeds.

struct GapStudyRow {
  std::int64_t m = 0;
  std::uint64_t seed = 0;
  std::string estimator;  // "fme" or "se"
  double gap = 0.0;
};

struct GapStudyMedian {
  std::int64_t m = 0;
  double fme_median = 0.0;
  double se_median = 0.0;
};

struct GapStudyResult {
  std::vector<GapStudyRow> rows;        // ordered by (m, seed, estimator)
  std::vector<GapStudyMedian> medians;  // ordered by m
};

namespace detail {
inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

inline GapStudyResult gap_study(const AnyModel& model,
                                const std::vector<std::int64_t>& m_values,
                                int n_seeds, std::uint64_t base_seed) {
  if (m_values.empty()) throw InvalidInputError("gap_study: m_values must be nonempty");
  if (n_seeds < 1) throw InvalidInputError("gap_study: n_seeds must be >= 1");
  const MomentPair exact = exact_moments(model);
  GapStudyResult result;
  for (const std::int64_t m : m_values) {
    std::vector<double> fme_gaps, se_gaps;
    for (int si = 0; si < n_seeds; ++si) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(si);
      const PairedDraw draw = paired_fme_se_draw(model, m, seed);
      const double fme_gap =
          frobenius_norm(fme_moments(draw.cms).second - exact.second);
      const double se_gap =
          frobenius_norm(se_moments(draw.sample).second - exact.second);
      result.rows.push_back({m, seed, "fme", fme_gap});
      result.rows.push_back({m, seed, "se", se_gap});
      fme_gaps.push_back(fme_gap);
      se_gaps.push_back(se_gap);
    }
    result.medians.push_back(
        {m, detail::median_of(fme_gaps), detail::median_of(se_gaps)});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Variance study: replicated empirical variances of every first-moment
// coordinate and second-moment entry, for FME and SE.

struct VarianceStudyResult {
  Vector fme_first_var;   // d
  Vector se_first_var;    // d
  Matrix fme_second_var;  // d x d
  Matrix se_second_var;   // d x d
  double fraction_fme_not_worse = 0.0;  // share of coordinates+entries with
                                        // Var(FME) <= Var(SE)
};

inline VarianceStudyResult variance_study(const AnyModel& model, std::int64_t m,
                                          int replications, std::uint64_t base_seed) {
  if (replications < 2) {
    throw InvalidInputError("variance_study: replications must be >= 2");
  }
  const Eigen::Index d = model_dim(model);
  const Eigen::Index r = replications;
  Matrix fme_first(r, d), se_first(r, d);
  Matrix fme_second(r, d * d), se_second(r, d * d);
  for (Eigen::Index rep = 0; rep < r; ++rep) {
    const PairedDraw draw =
        paired_fme_se_draw(model, m, base_seed + static_cast<std::uint64_t>(rep));
    const MomentPair fme = fme_moments(draw.cms);
    const MomentPair se = se_moments(draw.sample);
    fme_first.row(rep) = fme.first.transpose();
    se_first.row(rep) = se.first.transpose();
    fme_second.row(rep) = fme.second.mat().reshaped().transpose();
    se_second.row(rep) = se.second.mat().reshaped().transpose();
  }
  auto column_vars = [r](const Matrix& samples) {
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    return ((samples.rowwise() - mean).colwise().squaredNorm() /
            static_cast<double>(r - 1))
        .transpose()
        .eval();
  };
  VarianceStudyResult out{
      column_vars(fme_first), column_vars(se_first),
      Matrix(column_vars(fme_second).reshaped(d, d)),
      Matrix(column_vars(se_second).reshaped(d, d)), 0.0};
  Eigen::Index ok = (out.fme_first_var.array() <= out.se_first_var.array()).count() +
                    (out.fme_second_var.array() <= out.se_second_var.array()).count();
  out.fraction_fme_not_worse =
      static_cast<double>(ok) / static_cast<double>(d + d * d);
  return out;
}

}  // namespace mega
