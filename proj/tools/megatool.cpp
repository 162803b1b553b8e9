// mega: command-line front end for moment-estimator-gap analysis.
//
// Subcommands: gen-data, fit, mega, compare, select, path, gap-study,
// variance-study. Every command is a deterministic function of its flags and
// seed, writes its tables as CSV into --out, and leaves a manifest.json
// describing the run.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mega/mega.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out = "mega_out";
  std::int64_t m = 10000;
  int threads = 1;
};

void add_global_opts(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--seed", g.seed, "RNG seed");
  cmd->add_option("--out", g.out, "output directory");
  cmd->add_option("--m", g.m, "Monte Carlo draws (0 = exact moments where available)");
  cmd->add_option("--threads", g.threads, "worker threads for replicated studies")
      ->check(CLI::PositiveNumber);
}

struct FitOpts {
  mega::FitConfig cfg;
  void add_to(CLI::App* cmd) {
    cmd->add_option("--max-iter", cfg.max_iter, "EM iteration cap");
    cmd->add_option("--tol", cfg.loglik_tol, "EM absolute log-likelihood improvement tolerance");
    cmd->add_option("--restarts", cfg.n_restarts, "EM restarts");
    cmd->add_option("--floor", cfg.variance_floor, "variance floor added each M-step");
  }
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

void write_run_manifest(const GlobalOpts& g, const std::string& command,
                        std::map<std::string, std::string> params,
                        std::vector<std::string> artifacts) {
  mega::RunManifest manifest;
  manifest.command = command;
  manifest.parameters = std::move(params);
  manifest.seed = g.seed;
  manifest.artifacts = std::move(artifacts);
  mega::write_manifest(std::move(manifest), out_path(g, "manifest.json"));
}

/// Deterministic parallel map over [0, count): results land by index
/// regardless of scheduling.
template <typename Fn>
void parallel_for_index(std::int64_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::int64_t> next{0};
  const int used = static_cast<int>(std::min<std::int64_t>(threads, count));
  for (int t = 0; t < used; ++t) {
    pool.emplace_back([&]() {
      for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

mega::MegaReport report_for_model(const mega::Dataset& data, const mega::AnyModel& model,
                                  std::int64_t m, std::uint64_t seed) {
  if (m == 0) return mega::compute_mega(data, mega::exact_moments(model));
  return mega::compute_mega(data, mega::conditional_moment_sample(model, m, seed));
}

void print_report(const mega::MegaReport& r) {
  std::cout << "1MEGA-F = " << mega::format_double(r.mega1_f) << '\n';
  std::cout << "2MEGA-F = " << mega::format_double(r.mega2_f) << '\n';
  std::cout << "m_used = " << r.m_used << '\n';
  if (r.seed) std::cout << "seed = " << *r.seed << '\n';
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const GlobalOpts& g, const std::string& kind, std::int64_t n,
                 double noise, const std::string& model_path) {
  std::vector<std::string> artifacts;
  const std::string data_path = out_path(g, "dataset.csv");
  if (kind == "three_cluster") {
    auto [data, generator] = mega::gen_three_cluster(n, g.seed);
    mega::write_dataset(data, data_path);
    const std::string gen_path = out_path(g, "generator_model.txt");
    mega::write_model(generator, gen_path);
    artifacts = {data_path, gen_path};
  } else if (kind == "moons") {
    mega::write_dataset(mega::gen_moons(n, noise, g.seed), data_path);
    artifacts = {data_path};
  } else if (kind == "custom_gmm") {
    if (model_path.empty()) {
      throw mega::InvalidInputError("gen-data custom_gmm requires --model");
    }
    const auto model = mega::read_model(model_path);
    mega::write_dataset(mega::ancestral_sample(model, n, g.seed), data_path);
    artifacts = {data_path};
  } else {
    throw mega::InvalidInputError("unknown kind '" + kind +
                                  "' (expected three_cluster, moons or custom_gmm)");
  }
  write_run_manifest(g, "gen-data",
                     {{"kind", kind},
                      {"n", std::to_string(n)},
                      {"noise", mega::format_double(noise)},
                      {"model", model_path}},
                     artifacts);
  std::cout << "wrote " << data_path << " (" << n << " rows)\n";
  return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& data_path, const std::string& family,
            int k, int latent_dim, FitOpts& fit) {
  const mega::Dataset data = mega::read_dataset(data_path);
  const std::string model_path = out_path(g, "model.txt");
  if (family == "gmm") {
    fit.cfg.seed = g.seed;
    const auto result = mega::gmm_fit_em(data, k, fit.cfg);
    mega::write_model(result.model, model_path);
    std::cout << "loglik = " << mega::format_double(result.loglik) << '\n';
    std::cout << "iterations = " << result.iterations
              << (result.converged ? " (converged)" : " (max_iter reached)") << '\n';
  } else if (family == "ppca") {
    const auto model = mega::ppca_fit(data, latent_dim);
    mega::write_model(model, model_path);
    std::cout << "sigma2 = " << mega::format_double(model.sigma2()) << '\n';
  } else {
    throw mega::InvalidInputError("unknown family '" + family + "' (expected gmm or ppca)");
  }
  write_run_manifest(g, "fit",
                     {{"data", data_path},
                      {"family", family},
                      {"k", std::to_string(k)},
                      {"latent_dim", std::to_string(latent_dim)},
                      {"max_iter", std::to_string(fit.cfg.max_iter)},
                      {"tol", mega::format_double(fit.cfg.loglik_tol)},
                      {"restarts", std::to_string(fit.cfg.n_restarts)},
                      {"floor", mega::format_double(fit.cfg.variance_floor)}},
                     {model_path});
  std::cout << "wrote " << model_path << '\n';
  return 0;
}

int cmd_mega(const GlobalOpts& g, const std::string& data_path,
             const std::string& model_path, const std::string& cms_path, bool exact,
             bool op_norm) {
  if (model_path.empty() == cms_path.empty()) {
    throw mega::InvalidInputError("mega needs exactly one of --model or --cms");
  }
  if (exact && model_path.empty()) {
    throw mega::InvalidInputError("--exact is only valid together with --model");
  }
  const mega::Dataset data = mega::read_dataset(data_path);
  mega::MegaReport report = [&] {
    if (!model_path.empty()) {
      const auto model = mega::read_model(model_path);
      return report_for_model(data, model, exact ? 0 : g.m, g.seed);
    }
    return mega::compute_mega(data, mega::read_conditional_moments(cms_path));
  }();
  print_report(report);
  if (op_norm) {
    // Exploratory alternative to the Frobenius collapse of the gap matrix.
    const auto on = mega::operator_norm(report.gap2);
    std::cout << "2MEGA-OP = " << mega::format_double(on.value)
              << (on.converged ? "" : " (not converged)") << '\n';
  }
  const std::string report_path = out_path(g, "mega_report.csv");
  mega::write_mega_report_csv(report, report_path);
  write_run_manifest(g, "mega",
                     {{"data", data_path},
                      {"model", model_path},
                      {"cms", cms_path},
                      {"m", std::to_string(g.m)},
                      {"exact", exact ? "true" : "false"}},
                     {report_path});
  return 0;
}

int cmd_compare(const GlobalOpts& g, const std::string& data_path,
                const std::vector<std::string>& model_paths) {
  if (model_paths.size() < 2) {
    throw mega::InvalidInputError("compare needs at least two --model paths");
  }
  const mega::Dataset data = mega::read_dataset(data_path);
  // Reports work in any dimension; scatter plots are emitted only for 2-D data.

  struct Entry {
    std::size_t index;
    std::string path;
    mega::MegaReport report;
  };
  std::vector<Entry> entries;
  std::vector<std::string> artifacts;
  for (std::size_t i = 0; i < model_paths.size(); ++i) {
    const auto model = mega::read_model(model_paths[i]);
    mega::MegaReport report = report_for_model(data, model, g.m, g.seed);

    const std::string report_path =
        out_path(g, "report_" + std::to_string(i) + ".csv");
    mega::write_mega_report_csv(report, report_path);
    artifacts.push_back(report_path);

    const mega::Dataset sample =
        mega::ancestral_sample(model, 500, g.seed + static_cast<std::uint64_t>(i));
    const std::string sample_path =
        out_path(g, "sample_" + std::to_string(i) + ".csv");
    mega::write_dataset(sample, sample_path);
    artifacts.push_back(sample_path);

    if (data.dim() == 2) {
      const std::string svg_path =
          out_path(g, "scatter_" + std::to_string(i) + ".svg");
      mega::write_scatter_svg(
          {{&data, "#1f77b4", "data"}, {&sample, "#d62728", "generated"}}, svg_path);
      artifacts.push_back(svg_path);
    }
    entries.push_back({i, model_paths[i], std::move(report)});
  }

  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.report.mega2_f != b.report.mega2_f) return a.report.mega2_f < b.report.mega2_f;
    return a.report.mega1_f < b.report.mega1_f;
  });

  const std::string ranking_path = out_path(g, "ranking.csv");
  {
    std::ofstream out(ranking_path);
    out << "rank,model,mega1_f,mega2_f,m_used,seed\n";
    for (std::size_t r = 0; r < entries.size(); ++r) {
      const auto& e = entries[r];
      out << (r + 1) << ',' << e.path << ',' << mega::format_double(e.report.mega1_f)
          << ',' << mega::format_double(e.report.mega2_f) << ',' << e.report.m_used
          << ',' << g.seed << '\n';
    }
  }
  artifacts.push_back(ranking_path);

  std::cout << "rank  mega2_f       mega1_f       model\n";
  for (std::size_t r = 0; r < entries.size(); ++r) {
    const auto& e = entries[r];
    std::printf("%-4zu  %-12.6g  %-12.6g  %s\n", r + 1, e.report.mega2_f,
                e.report.mega1_f, e.path.c_str());
  }

  std::map<std::string, std::string> params{{"data", data_path},
                                            {"m", std::to_string(g.m)}};
  for (std::size_t i = 0; i < model_paths.size(); ++i) {
    params["model." + std::to_string(i)] = model_paths[i];
  }
  write_run_manifest(g, "compare", std::move(params), artifacts);
  return 0;
}

std::vector<mega::SelectionResult> run_path(const GlobalOpts& g,
                                            const std::string& data_path, int k_min,
                                            int k_max, std::vector<double> alphas,
                                            FitOpts& fit) {
  const mega::Dataset data = mega::read_dataset(data_path);
  fit.cfg.seed = g.seed;
  std::sort(alphas.begin(), alphas.end());
  return mega::regularization_path(data, k_min, k_max, alphas, g.m, fit.cfg);
}

void print_selection(const std::vector<mega::SelectionResult>& path) {
  for (const auto& result : path) {
    std::cout << "alpha = " << mega::format_double(result.alpha)
              << ": best_by_penalized = " << result.best_by_penalized
              << " (best_by_aic = " << result.best_by_aic << ")\n";
  }
}

int cmd_select(const GlobalOpts& g, const std::string& data_path, int k_min, int k_max,
               std::vector<double> alphas, FitOpts& fit) {
  if (alphas.empty()) alphas = mega::default_alpha_grid();
  const auto path = run_path(g, data_path, k_min, k_max, std::move(alphas), fit);

  std::vector<std::string> artifacts;
  const std::string aic_path = out_path(g, "aic.csv");
  mega::write_selection_csv(path.front(), aic_path);  // AIC columns are alpha-free
  artifacts.push_back(aic_path);
  for (const auto& result : path) {
    const std::string p =
        out_path(g, "selection_alpha_" + mega::format_double(result.alpha) + ".csv");
    mega::write_selection_csv(result, p);
    artifacts.push_back(p);
  }
  const std::string path_csv = out_path(g, "path.csv");
  mega::write_selection_csv(path, path_csv);
  artifacts.push_back(path_csv);

  print_selection(path);
  write_run_manifest(g, "select",
                     {{"data", data_path},
                      {"k_min", std::to_string(k_min)},
                      {"k_max", std::to_string(k_max)},
                      {"m", std::to_string(g.m)},
                      {"alphas", std::to_string(path.size())}},
                     artifacts);
  return 0;
}

int cmd_path(const GlobalOpts& g, const std::string& data_path, int k_min, int k_max,
             std::vector<double> alphas, FitOpts& fit) {
  if (alphas.empty()) alphas = mega::default_alpha_grid();
  const auto path = run_path(g, data_path, k_min, k_max, std::move(alphas), fit);
  const std::string path_csv = out_path(g, "path.csv");
  mega::write_selection_csv(path, path_csv);
  print_selection(path);
  write_run_manifest(g, "path",
                     {{"data", data_path},
                      {"k_min", std::to_string(k_min)},
                      {"k_max", std::to_string(k_max)},
                      {"m", std::to_string(g.m)},
                      {"alphas", std::to_string(path.size())}},
                     {path_csv});
  return 0;
}

int cmd_gap_study(const GlobalOpts& g, const std::string& model_path,
                  std::vector<std::int64_t> m_values, int n_seeds) {
  const auto model = mega::read_model(model_path);
  std::sort(m_values.begin(), m_values.end());

  // One (m, seed) cell per task; canonical order is restored by index.
  const auto exact = mega::exact_moments(model);
  const std::int64_t cells = static_cast<std::int64_t>(m_values.size()) * n_seeds;
  std::vector<double> fme_gap(cells), se_gap(cells);
  parallel_for_index(cells, g.threads, [&](std::int64_t idx) {
    const std::size_t mi = static_cast<std::size_t>(idx / n_seeds);
    const int si = static_cast<int>(idx % n_seeds);
    const auto draw = mega::paired_fme_se_draw(model, m_values[mi],
                                               g.seed + static_cast<std::uint64_t>(si));
    fme_gap[idx] = mega::frobenius_norm(mega::fme_moments(draw.cms).second - exact.second);
    se_gap[idx] = mega::frobenius_norm(mega::se_moments(draw.sample).second - exact.second);
  });

  mega::GapStudyResult result;
  for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
    std::vector<double> fg, sg;
    for (int si = 0; si < n_seeds; ++si) {
      const std::int64_t idx = static_cast<std::int64_t>(mi) * n_seeds + si;
      const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(si);
      result.rows.push_back({m_values[mi], seed, "fme", fme_gap[idx]});
      result.rows.push_back({m_values[mi], seed, "se", se_gap[idx]});
      fg.push_back(fme_gap[idx]);
      sg.push_back(se_gap[idx]);
    }
    result.medians.push_back({m_values[mi], mega::detail::median_of(fg),
                              mega::detail::median_of(sg)});
  }

  const std::string gaps_path = out_path(g, "gaps.csv");
  {
    std::ofstream out(gaps_path);
    out << "m,seed,estimator,gap\n";
    for (const auto& row : result.rows) {
      out << row.m << ',' << row.seed << ',' << row.estimator << ','
          << mega::format_double(row.gap) << '\n';
    }
  }
  const std::string medians_path = out_path(g, "medians.csv");
  {
    std::ofstream out(medians_path);
    out << "m,fme_median,se_median\n";
    for (const auto& row : result.medians) {
      out << row.m << ',' << mega::format_double(row.fme_median) << ','
          << mega::format_double(row.se_median) << '\n';
    }
  }
  std::cout << "m          fme_median    se_median\n";
  for (const auto& row : result.medians) {
    std::printf("%-9lld  %-12.6g  %-12.6g\n", static_cast<long long>(row.m),
                row.fme_median, row.se_median);
  }
  write_run_manifest(g, "gap-study",
                     {{"model", model_path},
                      {"n_seeds", std::to_string(n_seeds)},
                      {"m_values", std::to_string(m_values.size())}},
                     {gaps_path, medians_path});
  return 0;
}

int cmd_variance_study(const GlobalOpts& g, const std::string& model_path,
                       int replications) {
  const auto model = mega::read_model(model_path);
  const auto result = mega::variance_study(model, g.m, replications, g.seed);
  const Eigen::Index d = result.fme_first_var.size();

  const std::string var_path = out_path(g, "variances.csv");
  {
    std::ofstream out(var_path);
    out << "quantity,i,j,var_fme,var_se\n";
    for (Eigen::Index i = 0; i < d; ++i) {
      out << "first," << i << ",," << mega::format_double(result.fme_first_var[i])
          << ',' << mega::format_double(result.se_first_var[i]) << '\n';
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        out << "second," << i << ',' << j << ','
            << mega::format_double(result.fme_second_var(i, j)) << ','
            << mega::format_double(result.se_second_var(i, j)) << '\n';
      }
    }
  }
  std::cout << "fraction Var(FME) <= Var(SE) = "
            << mega::format_double(result.fraction_fme_not_worse) << '\n';
  write_run_manifest(g, "variance-study",
                     {{"model", model_path},
                      {"m", std::to_string(g.m)},
                      {"replications", std::to_string(replications)}},
                     {var_path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment-estimators-gap toolkit for latent variable generative models"};
  app.require_subcommand(1);

  // gen-data
  GlobalOpts g_gen;
  std::string gen_kind;
  std::int64_t gen_n = 1000;
  double gen_noise = 0.05;
  std::string gen_model;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--kind", gen_kind, "three_cluster | moons | custom_gmm")->required();
  gen->add_option("--n", gen_n, "number of rows")->required();
  gen->add_option("--noise", gen_noise, "noise standard deviation (moons)");
  gen->add_option("--model", gen_model, "generator model file (custom_gmm)");
  add_global_opts(gen, g_gen);

  // fit
  GlobalOpts g_fit;
  std::string fit_data, fit_family;
  int fit_k = 1, fit_latent = 1;
  FitOpts fit_opts;
  auto* fit = app.add_subcommand("fit", "fit a model to a dataset CSV");
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--family", fit_family, "gmm | ppca")->required();
  fit->add_option("--k", fit_k, "mixture components (gmm)");
  fit->add_option("--latent-dim", fit_latent, "latent dimension (ppca)");
  fit_opts.add_to(fit);
  add_global_opts(fit, g_fit);

  // mega
  GlobalOpts g_mega;
  std::string mega_data, mega_model, mega_cms;
  bool mega_exact = false;
  bool mega_opnorm = false;
  auto* megac = app.add_subcommand("mega", "compute 1MEGA-F and 2MEGA-F");
  megac->add_option("--data", mega_data, "dataset CSV")->required();
  megac->add_option("--model", mega_model, "model file");
  megac->add_option("--cms", mega_cms, "conditional-moment CSV from an external model");
  megac->add_flag("--exact", mega_exact, "use exact model moments (model route only)");
  megac->add_flag("--op-norm", mega_opnorm,
                  "also report the operator norm of the second-moment gap");
  add_global_opts(megac, g_mega);

  // compare
  GlobalOpts g_cmp;
  std::string cmp_data;
  std::vector<std::string> cmp_models;
  auto* cmp = app.add_subcommand("compare", "rank models by MEGA on one dataset");
  cmp->add_option("--data", cmp_data, "dataset CSV")->required();
  cmp->add_option("--model", cmp_models, "model file (give two or more)")->required();
  add_global_opts(cmp, g_cmp);

  // select
  GlobalOpts g_sel;
  std::string sel_data;
  int sel_kmin = 1, sel_kmax = 8;
  std::vector<double> sel_alphas;
  FitOpts sel_fit;
  auto* sel = app.add_subcommand("select", "sweep k and select by AIC and penalized likelihood");
  sel->add_option("--data", sel_data, "dataset CSV")->required();
  sel->add_option("--k-min", sel_kmin, "smallest k");
  sel->add_option("--k-max", sel_kmax, "largest k");
  sel->add_option("--alpha", sel_alphas, "penalty weight (repeatable; default grid)");
  sel_fit.add_to(sel);
  add_global_opts(sel, g_sel);

  // path
  GlobalOpts g_path;
  std::string path_data;
  int path_kmin = 1, path_kmax = 8;
  std::vector<double> path_alphas;
  FitOpts path_fit;
  auto* pth = app.add_subcommand("path", "regularization path over alpha");
  pth->add_option("--data", path_data, "dataset CSV")->required();
  pth->add_option("--k-min", path_kmin, "smallest k");
  pth->add_option("--k-max", path_kmax, "largest k");
  pth->add_option("--alphas", path_alphas, "alpha grid")->delimiter(',');
  path_fit.add_to(pth);
  add_global_opts(pth, g_path);

  // gap-study
  GlobalOpts g_gap;
  std::string gap_model;
  std::vector<std::int64_t> gap_m_values;
  int gap_seeds = 20;
  auto* gap = app.add_subcommand("gap-study", "FME vs SE accuracy against m");
  gap->add_option("--model", gap_model, "model file")->required();
  gap->add_option("--m-values", gap_m_values, "Monte Carlo grid")->delimiter(',');
  gap->add_option("--n-seeds", gap_seeds, "replicate seeds per m");
  add_global_opts(gap, g_gap);

  // variance-study
  GlobalOpts g_var;
  std::string var_model;
  int var_reps = 1000;
  auto* var = app.add_subcommand("variance-study", "replicated FME vs SE variances");
  var->add_option("--model", var_model, "model file")->required();
  var->add_option("--replications", var_reps, "replications");
  add_global_opts(var, g_var);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(g_gen, gen_kind, gen_n, gen_noise, gen_model);
    if (fit->parsed()) return cmd_fit(g_fit, fit_data, fit_family, fit_k, fit_latent, fit_opts);
    if (megac->parsed()) {
      return cmd_mega(g_mega, mega_data, mega_model, mega_cms, mega_exact, mega_opnorm);
    }
    if (cmp->parsed()) return cmd_compare(g_cmp, cmp_data, cmp_models);
    if (sel->parsed()) return cmd_select(g_sel, sel_data, sel_kmin, sel_kmax, sel_alphas, sel_fit);
    if (pth->parsed()) return cmd_path(g_path, path_data, path_kmin, path_kmax, path_alphas, path_fit);
    if (gap->parsed()) {
      if (gap_m_values.empty()) gap_m_values = {100, 1000, 10000, 100000};
      return cmd_gap_study(g_gap, gap_model, gap_m_values, gap_seeds);
    }
    if (var->parsed()) return cmd_variance_study(g_var, var_model, var_reps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
