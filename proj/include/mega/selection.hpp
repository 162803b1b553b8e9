// Model selection over the number of mixture components: AIC as printed in
// the source formulation (p = 2k), the MEGA-penalized likelihood objective,
// and regularization paths over the penalty weight alpha. Fits are computed
// once per k and shared across every alpha.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/gmm.hpp"

namespace mega {

/// AIC = 2p - 2 ln L with p = 2k.
inline double aic(double loglik, int k) {
  if (k < 1) throw InvalidInputError("aic: k must be >= 1");
  return 4.0 * k - 2.0 * loglik;
}

/// Penalized objective ll(S) - alpha * (1MEGA-F + sqrt(2MEGA-F)); higher is
/// better.
inline double mega_penalized_objective(double loglik, const MegaReport& report,
                                       double alpha) {
  if (!(alpha >= 0.0)) throw InvalidInputError("mega_penalized_objective: alpha must be >= 0");
  return loglik - alpha * (report.mega1_f + std::sqrt(report.mega2_f));
}

/// Default alpha grid for calibration sweeps.
inline std::vector<double> default_alpha_grid() {
  return {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
}

struct SelectionEntry {
  int k = 0;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double mega1_f = std::numeric_limits<double>::quiet_NaN();
  double mega2_f = std::numeric_limits<double>::quiet_NaN();
  double penalized_objective = std::numeric_limits<double>::quiet_NaN();
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::int64_t m_used = 0;
  bool failed = false;
  std::string error;
};

struct SelectionResult {
  std::vector<SelectionEntry> entries;  // ordered by k
  double alpha = 0.0;
  int best_by_aic = 0;
  int best_by_penalized = 0;
};

namespace detail {

struct FittedK {
  int k = 0;
  bool failed = false;
  std::string error;
  std::optional<GmmFitResult> fit;
  double mega1_f = 0.0;
  double mega2_f = 0.0;
  std::int64_t m_used = 0;
};

/// Fit one GMM per k and attach its MEGA (exact model moments when m == 0,
/// otherwise Monte Carlo conditional-moment draws with a common seed).
/// Each k past the first adds a warm-started run seeded from the previous k's
/// solution, keeping the likelihood curve non-decreasing across the sweep.
inline std::vector<FittedK> fit_k_range(const Dataset& s, int k_min, int k_max,
                                        std::int64_t m, const FitConfig& cfg) {
  if (k_min < 1 || k_min > k_max) {
    throw InvalidInputError("selection: need 1 <= k_min <= k_max");
  }
  std::vector<FittedK> fits;
  fits.reserve(static_cast<std::size_t>(k_max - k_min + 1));
  for (int k = k_min; k <= k_max; ++k) {
    FittedK fk;
    fk.k = k;
    const FittedK* prev = fits.empty() ? nullptr : &fits.back();
    const bool can_warm = prev != nullptr && !prev->failed && prev->k + 1 == k;
    try {
      fk.fit = can_warm ? gmm_fit_em_warm_started(s, k, cfg, prev->fit->model)
                        : gmm_fit_em(s, k, cfg);
      MegaReport report =
          (m == 0) ? compute_mega(s, gmm_exact_moments(fk.fit->model))
                   : compute_mega(s, gmm_conditional_moment_sample(fk.fit->model, m,
                                                                   cfg.seed));
      fk.mega1_f = report.mega1_f;
      fk.mega2_f = report.mega2_f;
      fk.m_used = report.m_used;
    } catch (const std::exception& e) {
      fk.failed = true;
      fk.error = e.what();
      fk.fit.reset();
    }
    fits.push_back(std::move(fk));
  }
  return fits;
}

inline SelectionResult assemble(const std::vector<FittedK>& fits, double alpha,
                                const FitConfig& cfg) {
  SelectionResult result;
  result.alpha = alpha;
  double best_aic = std::numeric_limits<double>::infinity();
  double best_obj = -std::numeric_limits<double>::infinity();
  for (const FittedK& fk : fits) {
    SelectionEntry e;
    e.k = fk.k;
    e.alpha = alpha;
    e.seed = cfg.seed;
    if (fk.failed) {
      e.failed = true;
      e.error = fk.error;
    } else {
      e.loglik = fk.fit->loglik;
      e.aic = aic(e.loglik, e.k);
      e.mega1_f = fk.mega1_f;
      e.mega2_f = fk.mega2_f;
      e.m_used = fk.m_used;
      e.penalized_objective =
          e.loglik - alpha * (e.mega1_f + std::sqrt(e.mega2_f));
      // Ties break toward smaller k, so strict comparisons suffice on the
      // ascending-k sweep.
      if (e.aic < best_aic) {
        best_aic = e.aic;
        result.best_by_aic = e.k;
      }
      if (e.penalized_objective > best_obj) {
        best_obj = e.penalized_objective;
        result.best_by_penalized = e.k;
      }
    }
    result.entries.push_back(std::move(e));
  }
  if (result.best_by_aic == 0) {
    throw NumericalError("selection: every k failed to fit");
  }
  return result;
}

}  // namespace detail

/// Sweep k over [k_min, k_max] at a single alpha.
inline SelectionResult select_k(const Dataset& s, int k_min, int k_max, double alpha,
                                std::int64_t m, const FitConfig& cfg) {
  if (!(alpha >= 0.0)) throw InvalidInputError("select_k: alpha must be >= 0");
  const auto fits = detail::fit_k_range(s, k_min, k_max, m, cfg);
  return detail::assemble(fits, alpha, cfg);
}

/// One SelectionResult per alpha, reusing the same per-k fits for every alpha
/// (only the objective depends on alpha).
inline std::vector<SelectionResult> regularization_path(const Dataset& s, int k_min,
                                                        int k_max,
                                                        const std::vector<double>& alphas,
                                                        std::int64_t m,
                                                        const FitConfig& cfg) {
  if (alphas.empty()) throw InvalidInputError("regularization_path: alphas must be nonempty");
  if (!std::is_sorted(alphas.begin(), alphas.end())) {
    throw InvalidInputError("regularization_path: alphas must be sorted ascending");
  }
  for (double a : alphas) {
    if (!(a >= 0.0)) throw InvalidInputError("regularization_path: alphas must be >= 0");
  }
  const auto fits = detail::fit_k_range(s, k_min, k_max, m, cfg);
  std::vector<SelectionResult> path;
  path.reserve(alphas.size());
  for (double a : alphas) path.push_back(detail::assemble(fits, a, cfg));
  return path;
}

}  // namespace mega
