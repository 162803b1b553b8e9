// Gaussian mixture model: EM fitting with k-means++ style seeding and a
// variance floor, stabilized log-likelihood, ancestral sampling, latent
// conditional-moment draws, and closed-form exact moments.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/moments.hpp"
#include "mega/rng.hpp"
#include "mega/sym_matrix.hpp"

namespace mega {

struct FitConfig {
  int max_iter = 500;
  double loglik_tol = 1e-6;  // absolute improvement of the summed log-likelihood
  int n_restarts = 5;
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iter < 1) throw InvalidInputError("FitConfig: max_iter must be >= 1");
    if (!(loglik_tol > 0.0)) throw InvalidInputError("FitConfig: loglik_tol must be > 0");
    if (n_restarts < 1) throw InvalidInputError("FitConfig: n_restarts must be >= 1");
    if (!(variance_floor > 0.0)) {
      throw InvalidInputError("FitConfig: variance_floor must be > 0");
    }
  }
};

class GmmModel {
 public:
  GmmModel(Vector weights, std::vector<Vector> means, std::vector<Matrix> covariances)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        covariances_(std::move(covariances)) {
    const auto k = static_cast<std::size_t>(weights_.size());
    if (k == 0 || means_.size() != k || covariances_.size() != k) {
      throw InvalidInputError("GmmModel: k components require k weights/means/covariances");
    }
    if ((weights_.array() < 0.0).any() || !all_finite(weights_)) {
      throw InvalidInputError("GmmModel: weights must be finite and >= 0");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-9) {
      throw InvalidInputError("GmmModel: weights must sum to 1 within 1e-9");
    }
    const Eigen::Index d = means_[0].size();
    if (d < 1) throw InvalidInputError("GmmModel: dimension must be >= 1");
    llts_.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      if (means_[j].size() != d || !all_finite(means_[j])) {
        throw InvalidInputError("GmmModel: mean " + std::to_string(j) + " invalid");
      }
      const Matrix& c = covariances_[j];
      if (c.rows() != d || c.cols() != d || !all_finite(c)) {
        throw InvalidInputError("GmmModel: covariance " + std::to_string(j) +
                                " has wrong shape or non-finite entries");
      }
      if (((c - c.transpose()).array().abs() > 1e-9).any()) {
        throw InvalidInputError("GmmModel: covariance " + std::to_string(j) +
                                " is not symmetric");
      }
      covariances_[j] = ((c + c.transpose()) / 2.0).eval();
      Eigen::LLT<Matrix> llt(covariances_[j]);
      if (llt.info() != Eigen::Success) {
        throw InvalidInputError("GmmModel: covariance " + std::to_string(j) +
                                " is not positive definite");
      }
      llts_.push_back(std::move(llt));
    }
  }

  Eigen::Index k() const { return weights_.size(); }
  Eigen::Index dim() const { return means_[0].size(); }
  const Vector& weights() const { return weights_; }
  const Vector& mean(Eigen::Index j) const { return means_[static_cast<std::size_t>(j)]; }
  const Matrix& covariance(Eigen::Index j) const {
    return covariances_[static_cast<std::size_t>(j)];
  }
  const Eigen::LLT<Matrix>& cholesky(Eigen::Index j) const {
    return llts_[static_cast<std::size_t>(j)];
  }

 private:
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Eigen::LLT<Matrix>> llts_;
};

namespace detail {

/// log N(x; mu, Sigma) through the Cholesky factor of Sigma.
inline double gaussian_logpdf(const Vector& x, const Vector& mu,
                              const Eigen::LLT<Matrix>& llt) {
  const Eigen::Index d = x.size();
  const Matrix& l = llt.matrixLLT();
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) half_logdet += std::log(l(i, i));
  const Vector y = llt.matrixL().solve(x - mu);
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - half_logdet -
         0.5 * y.squaredNorm();
}

/// log(sum(exp(v))) with max-shift stabilization.
inline double log_sum_exp(const Vector& v) {
  const double vmax = v.maxCoeff();
  if (!std::isfinite(vmax)) return vmax;
  return vmax + std::log((v.array() - vmax).exp().sum());
}

}  // namespace detail

/// Summed log-likelihood of the dataset under the mixture.
inline double gmm_loglik(const GmmModel& g, const Dataset& s) {
  if (g.dim() != s.dim()) {
    throw InvalidInputError("gmm_loglik: dimension mismatch");
  }
  const Eigen::Index k = g.k();
  Vector log_w = g.weights().array().max(1e-300).log().matrix();
  double total = 0.0;
  Vector terms(k);
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const Vector x = s.row(i);
    for (Eigen::Index j = 0; j < k; ++j) {
      terms[j] = log_w[j] + detail::gaussian_logpdf(x, g.mean(j), g.cholesky(j));
    }
    total += detail::log_sum_exp(terms);
  }
  if (!std::isfinite(total)) {
    throw NumericalError("gmm_loglik: non-finite log-likelihood");
  }
  return total;
}

/// Closed-form model moments: first = sum_j pi_j mu_j,
/// second = sum_j pi_j (Sigma_j + mu_j mu_j^T).
inline MomentPair gmm_exact_moments(const GmmModel& g) {
  const Eigen::Index d = g.dim();
  Vector first = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < g.k(); ++j) {
    const double w = g.weights()[j];
    first += w * g.mean(j);
    second += w * (g.covariance(j) + g.mean(j) * g.mean(j).transpose());
  }
  return {first, SymMatrix(second)};
}

/// m latent draws z_i ~ Categorical(pi); entry i carries the conditional
/// moments (mu_{z_i}, Sigma_{z_i}). Deterministic given the seed.
inline ConditionalMomentSample gmm_conditional_moment_sample(const GmmModel& g,
                                                             std::int64_t m,
                                                             std::uint64_t seed) {
  if (m < 1) throw InvalidInputError("gmm_conditional_moment_sample: m must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = g.dim();
  Matrix means(m, d);
  std::vector<Matrix> variances;
  variances.reserve(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const Eigen::Index z = rng.categorical(g.weights());
    means.row(i) = g.mean(z).transpose();
    variances.push_back(g.covariance(z));
  }
  ConditionalMomentSample cms(std::move(means), std::move(variances));
  cms.set_seed(seed);
  return cms;
}

/// Ancestral sample: z ~ Categorical(pi), then x ~ N(mu_z, Sigma_z).
inline Dataset gmm_ancestral_sample(const GmmModel& g, std::int64_t n,
                                    std::uint64_t seed) {
  if (n < 1) throw InvalidInputError("gmm_ancestral_sample: n must be >= 1");
  Rng rng(seed);
  const Eigen::Index d = g.dim();
  Matrix rows(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    const Eigen::Index z = rng.categorical(g.weights());
    const Vector eps = rng.normal_vector(d);
    rows.row(i) = (g.mean(z) + g.cholesky(z).matrixL() * eps).transpose();
  }
  return Dataset(std::move(rows));
}

struct GmmFitResult {
  GmmModel model;
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // one entry per EM iteration of the winning restart
  int iterations = 0;
  bool converged = false;
  int restarts_used = 0;
  int degenerate_restarts = 0;
};

namespace detail {

/// k-means++ style seeding: first center uniform over rows, subsequent
/// centers drawn proportional to squared distance from the nearest chosen one.
inline std::vector<Vector> kmeanspp_means(const Dataset& s, Eigen::Index k, Rng& rng) {
  const Eigen::Index n = s.n();
  std::vector<Vector> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(s.row(static_cast<Eigen::Index>(rng.uniform() * n)));
  Vector d2 = (s.rows().rowwise() - centers[0].transpose()).rowwise().squaredNorm();
  while (static_cast<Eigen::Index>(centers.size()) < k) {
    Eigen::Index pick;
    if (d2.sum() > 0.0) {
      pick = rng.categorical(d2);
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform() * n);
    }
    centers.push_back(s.row(pick));
    d2 = d2.cwiseMin(
        (s.rows().rowwise() - centers.back().transpose()).rowwise().squaredNorm());
  }
  return centers;
}

struct EmRun {
  bool ok = false;
  std::string failure;
  double loglik = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  bool converged = false;
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

struct EmInit {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

inline EmRun run_em_once(const Dataset& s, Eigen::Index k, const FitConfig& cfg,
                         std::uint64_t seed, const EmInit* init = nullptr) {
  const Eigen::Index n = s.n();
  const Eigen::Index d = s.dim();
  Rng rng(seed);
  EmRun run;

  if (init != nullptr) {
    run.weights = init->weights;
    run.means = init->means;
    run.covariances = init->covariances;
  } else {
    run.means = kmeanspp_means(s, k, rng);
    const Vector xbar = data_first_moment(s);
    Matrix centered = s.rows().rowwise() - xbar.transpose();
    Matrix global_cov = (centered.transpose() * centered) / static_cast<double>(n) +
                        cfg.variance_floor * Matrix::Identity(d, d);
    run.weights = Vector::Constant(k, 1.0 / static_cast<double>(k));
    run.covariances.assign(static_cast<std::size_t>(k), global_cov);
  }

  Matrix resp(n, k);
  Vector log_terms(k);

  // E-step: fills responsibilities and returns the log-likelihood of the
  // current parameters, or NaN on a numerical failure.
  auto e_step = [&]() -> double {
    std::vector<Eigen::LLT<Matrix>> llts;
    llts.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::LLT<Matrix> llt(run.covariances[static_cast<std::size_t>(j)]);
      if (llt.info() != Eigen::Success) {
        run.failure = "covariance " + std::to_string(j) + " lost positive definiteness";
        return std::numeric_limits<double>::quiet_NaN();
      }
      llts.push_back(std::move(llt));
    }
    Vector log_w = run.weights.array().max(1e-300).log().matrix();
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector x = s.row(i);
      for (Eigen::Index j = 0; j < k; ++j) {
        log_terms[j] = log_w[j] +
                       gaussian_logpdf(x, run.means[static_cast<std::size_t>(j)],
                                       llts[static_cast<std::size_t>(j)]);
      }
      const double lse = log_sum_exp(log_terms);
      ll += lse;
      resp.row(i) = (log_terms.array() - lse).exp().transpose();
    }
    if (!std::isfinite(ll) && run.failure.empty()) {
      run.failure = "non-finite log-likelihood";
    }
    return ll;
  };

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const double ll = e_step();
    if (!std::isfinite(ll)) return run;
    run.trace.push_back(ll);
    run.loglik = ll;
    if (iter > 0 && ll - prev_ll < cfg.loglik_tol) {
      // Parameters are unchanged since the M-step that produced this ll.
      run.converged = true;
      run.ok = true;
      return run;
    }
    prev_ll = ll;

    // M-step with the variance floor added to every covariance diagonal.
    const Vector nj = resp.colwise().sum().transpose();
    if ((nj.array() < 1e-10).any()) {
      run.failure = "a component collapsed to zero responsibility";
      return run;
    }
    run.weights = nj / static_cast<double>(n);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Vector mu = (resp.col(j).transpose() * s.rows()).transpose() / nj[j];
      Matrix dev = s.rows().rowwise() - mu.transpose();
      Matrix cov =
          (dev.transpose() * (dev.array().colwise() * resp.col(j).array()).matrix()) /
          nj[j];
      cov.diagonal().array() += cfg.variance_floor;
      run.means[static_cast<std::size_t>(j)] = mu;
      run.covariances[static_cast<std::size_t>(j)] = cov;
    }
  }

  // Iteration budget exhausted: evaluate the final parameters once more so the
  // reported log-likelihood matches the returned model.
  const double final_ll = e_step();
  if (!std::isfinite(final_ll)) return run;
  run.trace.push_back(final_ll);
  run.loglik = final_ll;
  run.ok = true;
  return run;
}

}  // namespace detail

namespace detail {

inline GmmFitResult fit_best_of(const Dataset& s, Eigen::Index k, const FitConfig& cfg,
                                const EmInit* warm);

}  // namespace detail

/// EM fit with n_restarts independently seeded restarts (seed+0 .. seed+r-1);
/// returns the restart with the highest final log-likelihood. A restart whose
/// responsibilities degenerate counts against the restart budget.
inline GmmFitResult gmm_fit_em(const Dataset& s, Eigen::Index k, const FitConfig& cfg) {
  return detail::fit_best_of(s, k, cfg, nullptr);
}

/// Like gmm_fit_em, but adds one warm-started run whose initial state is the
/// given smaller model with its heaviest component duplicated (weight split in
/// half). The warm run reproduces the smaller model's likelihood, so the best
/// of the runs can never fall below it; k-ascending sweeps use this to keep
/// the likelihood curve non-decreasing.
inline GmmFitResult gmm_fit_em_warm_started(const Dataset& s, Eigen::Index k,
                                            const FitConfig& cfg,
                                            const GmmModel& previous) {
  if (previous.k() + 1 != k || previous.dim() != s.dim()) {
    throw InvalidInputError("gmm_fit_em_warm_started: previous model must have k-1 components");
  }
  Eigen::Index heaviest = 0;
  previous.weights().maxCoeff(&heaviest);
  detail::EmInit init;
  init.weights = Vector(k);
  for (Eigen::Index j = 0; j < previous.k(); ++j) {
    init.weights[j] = previous.weights()[j];
    init.means.push_back(previous.mean(j));
    init.covariances.push_back(previous.covariance(j));
  }
  init.weights[heaviest] /= 2.0;
  init.weights[k - 1] = init.weights[heaviest];
  init.means.push_back(previous.mean(heaviest));
  init.covariances.push_back(previous.covariance(heaviest));
  return detail::fit_best_of(s, k, cfg, &init);
}

namespace detail {

inline GmmFitResult fit_best_of(const Dataset& s, Eigen::Index k, const FitConfig& cfg,
                                const EmInit* warm) {
  cfg.validate();
  if (k < 1) throw InvalidInputError("gmm_fit_em: k must be >= 1");
  if (k > s.n()) {
    throw InvalidInputError("gmm_fit_em: k = " + std::to_string(k) +
                            " exceeds the number of observations " +
                            std::to_string(s.n()));
  }

  detail::EmRun best;
  int degenerate = 0;
  int used = 0;
  std::string last_failure = "no restart attempted";
  for (int r = 0; r < cfg.n_restarts; ++r) {
    ++used;
    detail::EmRun run = detail::run_em_once(s, k, cfg, cfg.seed + static_cast<std::uint64_t>(r));
    if (!run.ok) {
      ++degenerate;
      last_failure = run.failure;
      continue;
    }
    if (!best.ok || run.loglik > best.loglik) best = std::move(run);
  }
  if (warm != nullptr) {
    detail::EmRun run = detail::run_em_once(s, k, cfg, cfg.seed, warm);
    if (run.ok && (!best.ok || run.loglik > best.loglik)) best = std::move(run);
  }
  if (!best.ok) {
    throw NumericalError("gmm_fit_em: all " + std::to_string(cfg.n_restarts) +
                         " restarts failed (" + last_failure + ")");
  }

  GmmFitResult result{
      GmmModel(std::move(best.weights), std::move(best.means), std::move(best.covariances)),
      best.loglik,
      std::move(best.trace),
      0,
      best.converged,
      used,
      degenerate};
  result.iterations = static_cast<int>(result.loglik_trace.size());
  return result;
}

}  // namespace detail

}  // namespace mega
