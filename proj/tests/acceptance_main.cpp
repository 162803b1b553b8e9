// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Thresholds are pinned here; experiment constants (sample
// sizes, Monte Carlo budgets, EM stopping for the selection study) were fixed
// by pilot calibration and are named next to each criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mega/mega.hpp"

using namespace mega;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

int failures = 0;

void run_criterion(int id, const std::string& name,
                   const std::function<void(Outcome&)>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.note(std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!out.pass) ++failures;
  std::printf("%s criterion %2d [%5.1fs] %s%s%s\n", out.pass ? "PASS" : "FAIL", id,
              secs, name.c_str(), out.detail.empty() ? "" : " -- ",
              out.detail.c_str());
  std::fflush(stdout);
}

Matrix make(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Dataset random_dataset(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  Rng rng(seed);
  Matrix rows(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) rows(i, j) = 1.7 * rng.normal() - 0.4;
  }
  return Dataset(rows);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Selection-study constants (pilot-calibrated): the loose EM stopping mirrors
// the library-default training the source experiment would have used; the
// small Monte Carlo budget keeps the penalty informative at alpha extremes.
constexpr std::int64_t kSelN = 800;
constexpr std::int64_t kSelM = 30;
constexpr int kSelSeeds = 5;

FitConfig selection_cfg(std::uint64_t data_seed) {
  FitConfig cfg;
  cfg.seed = 100 + data_seed;
  cfg.loglik_tol = 3.0;
  cfg.max_iter = 200;
  cfg.n_restarts = 2;
  return cfg;
}

struct SelectionStudy {
  std::vector<std::vector<SelectionResult>> paths;  // [seed][alpha]
  std::vector<double> alphas;
};

const SelectionStudy& selection_study() {
  static SelectionStudy study = [] {
    SelectionStudy s;
    s.alphas = default_alpha_grid();
    s.alphas.push_back(1000.0);
    for (std::uint64_t seed = 1; seed <= kSelSeeds; ++seed) {
      auto [data, generator] = gen_three_cluster(kSelN, seed);
      s.paths.push_back(
          regularization_path(data, 1, 8, s.alphas, kSelM, selection_cfg(seed)));
    }
    return s;
  }();
  return study;
}

// ---------------------------------------------------------------------------

void criterion_1_norms(Outcome& out) {
  Vector v34(2);
  v34 << 3, 4;
  out.require(std::abs(vector_qnorm(v34, 2.0) - 5.0) <= 1e-12, "qnorm (3,4)");
  out.require(vector_qnorm(Vector::Zero(3), 2.0) == 0.0, "qnorm zero");
  Vector v(3);
  v << 1, -2, 2;
  out.require(std::abs(vector_qnorm(v, 1.0) - 5.0) <= 1e-12, "qnorm q=1");

  out.require(std::abs(frobenius_norm(SymMatrix::identity(2)) - std::sqrt(2.0)) <= 1e-12,
              "frobenius identity");
  out.require(frobenius_norm(SymMatrix::zero(2)) == 0.0, "frobenius zero");
  out.require(std::abs(frobenius_norm(SymMatrix(make({{1, 2}, {2, 3}}))) -
                       std::sqrt(18.0)) <= 1e-12,
              "frobenius [[1,2],[2,3]]");

  struct Case {
    Matrix m;
    double expected;
  };
  const std::vector<Case> cases{
      {make({{2, 0}, {0, 1}}), 2.0},
      {make({{2, 1}, {1, 2}}), 3.0},
      {Matrix::Identity(3, 3), 1.0},
      {make({{-5, 0, 0}, {0, 2, 0}, {0, 0, 1}}), 5.0},
  };
  for (const auto& c : cases) {
    const auto r = operator_norm(SymMatrix(c.m));
    out.require(r.converged && std::abs(r.value - c.expected) <= 1e-8,
                "operator norm " + fmt(c.expected));
  }

  Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 6);
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < d * d; ++i) a(i) = 2.0 * rng.normal();
    SymMatrix m((a + a.transpose()) / 2.0);
    if (frobenius_norm(m) < operator_norm(m).value - 1e-9) {
      out.require(false, "frobenius >= operator violated");
      break;
    }
  }
}

void criterion_2_moment_identity(Outcome& out) {
  for (const auto& [seed, n, d] :
       std::vector<std::tuple<std::uint64_t, Eigen::Index, Eigen::Index>>{
           {1, 50, 1}, {2, 333, 2}, {3, 64, 5}}) {
    Dataset s = random_dataset(seed, n, d);
    const Vector xbar = data_first_moment(s);
    const Matrix cov = data_second_moment(s).mat() - xbar * xbar.transpose();
    GmmModel gauss(Vector::Ones(1), {xbar}, {cov});
    MegaReport r = compute_mega(s, gmm_exact_moments(gauss));
    out.require(r.mega1_f <= 1e-9, "1MEGA-F=" + fmt(r.mega1_f) + " d=" + fmt(d));
    out.require(r.mega2_f <= 1e-9, "2MEGA-F=" + fmt(r.mega2_f) + " d=" + fmt(d));
  }
}

void criterion_3_fme_consistency(Outcome& out) {
  const GmmModel gen = three_cluster_generator();
  const MomentPair exact = gmm_exact_moments(gen);
  const double exact_norm = frobenius_norm(exact.second);
  const std::vector<std::int64_t> grid{100, 1000, 10000, 100000};
  std::vector<double> medians;
  for (std::int64_t m : grid) {
    std::vector<double> gaps;
    for (int s = 0; s < 20; ++s) {
      auto cms = gmm_conditional_moment_sample(gen, m, 1000 + s);
      gaps.push_back(frobenius_norm(fme_moments(cms).second - exact.second));
    }
    medians.push_back(median_of(gaps));
  }
  out.require(medians.back() <= 0.01 * exact_norm,
              "median@1e5=" + fmt(medians.back()) + " vs 1% bound " +
                  fmt(0.01 * exact_norm));
  for (std::size_t i = 1; i < medians.size(); ++i) {
    out.require(medians[i] <= medians[i - 1],
                "median not non-increasing at m=" + fmt(grid[i]));
  }
  out.note("medians " + fmt(medians[0]) + " > " + fmt(medians[1]) + " > " +
           fmt(medians[2]) + " > " + fmt(medians[3]));
}

void criterion_4_fme_beats_se(Outcome& out) {
  const AnyModel gen{three_cluster_generator()};
  const auto result = gap_study(gen, {100, 1000, 10000, 100000}, 20, 1000);
  for (const auto& row : result.medians) {
    out.require(row.fme_median <= row.se_median,
                "m=" + fmt(row.m) + " fme=" + fmt(row.fme_median) + " > se=" +
                    fmt(row.se_median));
  }
  out.note("fme/se medians at m=100: " + fmt(result.medians[0].fme_median) + "/" +
           fmt(result.medians[0].se_median));
}

void criterion_5_variance_dominance(Outcome& out) {
  std::vector<Vector> means{Vector::Zero(2), (Vector(2) << 2.0, 1.0).finished()};
  std::vector<Matrix> covs{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  GmmModel g((Vector(2) << 0.5, 0.5).finished(), means, covs);
  const auto result = variance_study(AnyModel(g), 100, 1000, 4242);
  for (Eigen::Index i = 0; i < 2; ++i) {
    out.require(result.fme_first_var[i] <= 1.05 * result.se_first_var[i],
                "first[" + fmt(i) + "]");
    for (Eigen::Index j = 0; j < 2; ++j) {
      out.require(result.fme_second_var(i, j) <= 1.05 * result.se_second_var(i, j),
                  "second[" + fmt(i) + "," + fmt(j) + "]");
    }
  }
  out.note("fraction Var(FME)<=Var(SE): " + fmt(result.fraction_fme_not_worse));
}

void criterion_6_selection(Outcome& out) {
  const auto& study = selection_study();
  int aic_three = 0;
  for (const auto& path : study.paths) {
    if (path[0].best_by_aic == 3) ++aic_three;
  }
  out.require(aic_three >= 4,
              "AIC selected k=3 on " + fmt(aic_three) + "/5 seeds (need >= 4)");
  out.note("AIC->3 on " + fmt(aic_three) + "/5");

  // Grid alphas exclude the 1000 endpoint appended for criterion 7.
  int best_count = 0;
  double best_alpha = -1.0;
  for (std::size_t ai = 1; ai + 1 < study.alphas.size(); ++ai) {
    int three = 0;
    for (const auto& path : study.paths) {
      if (path[ai].best_by_penalized == 3) ++three;
    }
    if (three > best_count) {
      best_count = three;
      best_alpha = study.alphas[ai];
    }
  }
  std::string best_desc =
      best_count == 0 ? "no grid alpha selects k=3 on any seed"
                      : "best grid alpha " + fmt(best_alpha) + " selects k=3 on " +
                            fmt(best_count) + "/5 seeds";
  out.require(best_count >= 4,
              best_desc +
                  " (need >= 4/5); structurally expected: every EM M-step matches "
                  "the training moments exactly, so the penalty is k-independent "
                  "up to Monte Carlo noise and cannot single out k=3 (see README, "
                  "Known behavior)");
}

void criterion_7_path_endpoints(Outcome& out) {
  const auto& study = selection_study();
  for (std::size_t s = 0; s < study.paths.size(); ++s) {
    const auto& path = study.paths[s];
    out.require(path.front().best_by_penalized == 8,
                "alpha=0 picked k=" + fmt(path.front().best_by_penalized) +
                    " on seed " + fmt(s + 1));
    out.require(path.back().best_by_penalized == 1,
                "alpha=1000 picked k=" + fmt(path.back().best_by_penalized) +
                    " on seed " + fmt(s + 1));
  }
}

void criterion_8_comparison(Outcome& out) {
  auto [data, generator] = gen_three_cluster(1000, 3);
  const FitConfig cfg = selection_cfg(3);
  auto fit1 = gmm_fit_em(data, 1, cfg);
  auto fit3 = gmm_fit_em(data, 3, cfg);
  const std::uint64_t shared_seed = 7;
  MegaReport r1 =
      compute_mega(data, gmm_conditional_moment_sample(fit1.model, 10000, shared_seed));
  MegaReport r3 =
      compute_mega(data, gmm_conditional_moment_sample(fit3.model, 10000, shared_seed));
  out.require(r3.mega2_f < r1.mega2_f,
              "k=3 mega2=" + fmt(r3.mega2_f) + " not < k=1 mega2=" + fmt(r1.mega2_f) +
                  "; structurally expected: both fits match the training moments "
                  "exactly and the one-component FME has zero Monte Carlo "
                  "variance, so it always wins (see README, Known behavior)");

  // cms-file route against the in-process route under a shared seed.
  const fs::path tmp = fs::temp_directory_path() / "mega_acceptance_cms.csv";
  auto cms = gmm_conditional_moment_sample(fit3.model, 2000, 11);
  MegaReport in_process = compute_mega(data, cms);
  write_conditional_moments(cms, tmp.string());
  MegaReport via_file = compute_mega(data, read_conditional_moments(tmp.string()));
  fs::remove(tmp);
  out.require(std::abs(in_process.mega1_f - via_file.mega1_f) <= 1e-12 &&
                  std::abs(in_process.mega2_f - via_file.mega2_f) <= 1e-12 &&
                  (in_process.gap2.mat() - via_file.gap2.mat()).cwiseAbs().maxCoeff() <=
                      1e-12,
              "cms route != in-process route");
}

// Criterion 9 helpers: run the CLI twice and compare every artifact except the
// manifest (whose timestamp legitimately differs).

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_equal_excluding_manifest(const fs::path& a, const fs::path& b,
                                   std::string* mismatch) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename());
  std::set<std::string> names_b;
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename());
  if (names != names_b) {
    *mismatch = "different artifact sets";
    return false;
  }
  for (const auto& name : names) {
    if (name == "manifest.json") continue;
    if (slurp(a / name) != slurp(b / name)) {
      *mismatch = name;
      return false;
    }
  }
  return true;
}

void criterion_9_monotone_and_deterministic(Outcome& out) {
  // EM monotonicity across representative fits.
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    auto [data, generator] = gen_three_cluster(1000, seed);
    for (Eigen::Index k : {1, 3, 8}) {
      FitConfig cfg;
      cfg.seed = seed;
      auto fit = gmm_fit_em(data, k, cfg);
      for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
        if (fit.loglik_trace[i] < fit.loglik_trace[i - 1] - 1e-8) {
          out.require(false, "loglik dipped at k=" + fmt(k) + " iter=" + fmt(i));
        }
      }
    }
  }

  // Byte-identical reruns of every subcommand.
  const fs::path root = fs::temp_directory_path() / "mega_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = MEGA_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const std::string data_dir = (root / "data").string();
  if (!run("gen-data --kind three_cluster --n 300 --seed 5 --out " + data_dir)) {
    out.require(false, "gen-data failed");
    return;
  }
  const std::string data_csv = data_dir + "/dataset.csv";
  const std::string model_txt = data_dir + "/generator_model.txt";
  const std::string fit_dir = (root / "fit1").string();
  run("fit --data " + data_csv + " --family gmm --k 2 --seed 3 --out " + fit_dir);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-data", "gen-data --kind moons --n 200 --noise 0.05 --seed 2"},
      {"fit", "fit --data " + data_csv + " --family gmm --k 3 --seed 4"},
      {"fit-ppca", "fit --data " + data_csv + " --family ppca --latent-dim 1"},
      {"mega", "mega --data " + data_csv + " --model " + model_txt +
                   " --m 500 --seed 6"},
      {"compare", "compare --data " + data_csv + " --model " + model_txt +
                      " --model " + fit_dir + "/model.txt --m 300 --seed 6"},
      {"select", "select --data " + data_csv +
                     " --k-min 1 --k-max 3 --alpha 0 --alpha 2 --m 100 --seed 7 "
                     "--restarts 2 --tol 0.5"},
      {"path", "path --data " + data_csv +
                   " --k-min 1 --k-max 3 --alphas 0,1,1000 --m 100 --seed 7 "
                   "--restarts 2 --tol 0.5"},
      {"gap-study",
       "gap-study --model " + model_txt + " --m-values 50,100 --n-seeds 4 --seed 8"},
      {"variance-study",
       "variance-study --model " + model_txt + " --m 40 --replications 50 --seed 9"},
  };
  for (const auto& [name, args] : commands) {
    const fs::path a = root / (name + "_a");
    const fs::path b = root / (name + "_b");
    if (!run(args + " --out " + a.string()) || !run(args + " --out " + b.string())) {
      out.require(false, name + " exited nonzero");
      continue;
    }
    if (!fs::exists(a / "manifest.json")) {
      out.require(false, name + " wrote no manifest");
      continue;
    }
    std::string mismatch;
    if (!dirs_equal_excluding_manifest(a, b, &mismatch)) {
      out.require(false, name + " rerun differs: " + mismatch);
    }
  }
  fs::remove_all(root);
}

void criterion_10_ppca_oracle(Outcome& out) {
  Matrix w = (Matrix(2, 1) << 1.2, 0.5).finished();
  Vector b = (Vector(2) << 1.0, -0.5).finished();
  PpcaModel generator(w, b, 0.05);
  Dataset data = ppca_ancestral_sample(generator, 10000, 4);
  PpcaModel fitted = ppca_fit(data, 1);

  const MomentPair truth = ppca_exact_moments(generator);
  const MomentPair est = ppca_exact_moments(fitted);
  const double second_gap = frobenius_norm(est.second - truth.second);
  const double first_gap = (est.first - truth.first).norm();
  out.require(second_gap <= 0.05 * frobenius_norm(truth.second),
              "second-moment gap " + fmt(second_gap));
  out.require(first_gap <= 0.05 * truth.first.norm(),
              "first-moment gap " + fmt(first_gap));
  out.note("second gap " + fmt(second_gap) + " vs bound " +
           fmt(0.05 * frobenius_norm(truth.second)));
}

}  // namespace

int main() {
  run_criterion(1, "norm correctness", criterion_1_norms);
  run_criterion(2, "single-gaussian moment identity", criterion_2_moment_identity);
  run_criterion(3, "fme consistency over m", criterion_3_fme_consistency);
  run_criterion(4, "fme beats se accuracy", criterion_4_fme_beats_se);
  run_criterion(5, "fme variance dominance", criterion_5_variance_dominance);
  run_criterion(6, "selection reproduces aic and penalized k=3", criterion_6_selection);
  run_criterion(7, "regularization path endpoints", criterion_7_path_endpoints);
  run_criterion(8, "comparison ordering and cms route", criterion_8_comparison);
  run_criterion(9, "em monotonicity and cli determinism",
                criterion_9_monotone_and_deterministic);
  run_criterion(10, "ppca fit oracle", criterion_10_ppca_oracle);

  if (failures > 0) {
    std::printf("%d of 10 criteria failed\n", failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
