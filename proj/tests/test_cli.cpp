#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "mega/datagen.hpp"
#include "mega/estimators.hpp"
#include "mega/io.hpp"

using namespace mega;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

struct CliFixture {
  fs::path dir;

  CliFixture() {
    dir = fs::temp_directory_path() /
          ("mega_cli_test_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~CliFixture() { fs::remove_all(dir); }

  static int& counter() {
    static int c = 0;
    return c;
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  CliResult run(const std::string& args) const {
    const std::string out_file = path("stdout.tmp");
    const std::string err_file = path("stderr.tmp");
    const std::string cmd = std::string(MEGA_CLI_PATH) + " " + args + " > " +
                            out_file + " 2> " + err_file;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

double parse_metric(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " = ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 3));
}

}  // namespace

TEST_CASE("gen-data produces datasets, models and manifests", "[cli]") {
  CliFixture cli;
  auto r = cli.run("gen-data --kind three_cluster --n 60 --seed 7 --out " +
                   cli.path("tc"));
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(cli.path("tc") + "/dataset.csv"));
  CHECK(fs::exists(cli.path("tc") + "/generator_model.txt"));
  CHECK(fs::exists(cli.path("tc") + "/manifest.json"));
  Dataset data = read_dataset(cli.path("tc") + "/dataset.csv");
  CHECK(data.n() == 60);
  CHECK(data.dim() == 2);

  // Rerun with identical flags: byte-identical dataset.
  auto r2 = cli.run("gen-data --kind three_cluster --n 60 --seed 7 --out " +
                    cli.path("tc2"));
  REQUIRE(r2.exit_code == 0);
  CHECK(CliFixture::slurp(cli.path("tc") + "/dataset.csv") ==
        CliFixture::slurp(cli.path("tc2") + "/dataset.csv"));

  auto moons = cli.run("gen-data --kind moons --n 50 --noise 0.05 --seed 1 --out " +
                       cli.path("mo"));
  REQUIRE(moons.exit_code == 0);
  CHECK(read_dataset(cli.path("mo") + "/dataset.csv").n() == 50);

  auto bad = cli.run("gen-data --kind nope --n 10 --out " + cli.path("bad"));
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("mega command on the exact single-gaussian identity", "[cli]") {
  CliFixture cli;
  auto [data, generator] = gen_three_cluster(150, 3);
  write_dataset(data, cli.path("data.csv"));

  // Single Gaussian carrying the dataset mean and n-1 covariance.
  const Vector xbar = data_first_moment(data);
  const Matrix cov = data_second_moment(data).mat() - xbar * xbar.transpose();
  write_model(GmmModel(Vector::Ones(1), {xbar}, {cov}), cli.path("gauss.txt"));

  auto r = cli.run("mega --data " + cli.path("data.csv") + " --model " +
                   cli.path("gauss.txt") + " --exact --out " + cli.path("m1"));
  REQUIRE(r.exit_code == 0);
  CHECK(parse_metric(r.out, "1MEGA-F") <= 1e-9);
  CHECK(parse_metric(r.out, "2MEGA-F") <= 1e-9);
  CHECK(fs::exists(cli.path("m1") + "/mega_report.csv"));
  CHECK(fs::exists(cli.path("m1") + "/manifest.json"));

  // A corrupted model (means scaled by 2) has a strictly larger gap.
  GmmModel corrupted(Vector::Ones(1), {2.0 * xbar}, {cov});
  write_model(corrupted, cli.path("bad.txt"));
  auto rb = cli.run("mega --data " + cli.path("data.csv") + " --model " +
                    cli.path("bad.txt") + " --exact --out " + cli.path("m2"));
  REQUIRE(rb.exit_code == 0);
  CHECK(parse_metric(rb.out, "2MEGA-F") > parse_metric(r.out, "2MEGA-F"));

  // Exactly one of --model/--cms.
  auto rboth = cli.run("mega --data " + cli.path("data.csv") + " --out " + cli.path("m3"));
  CHECK(rboth.exit_code != 0);
}

TEST_CASE("mega cms route equals the model route", "[cli]") {
  CliFixture cli;
  auto [data, generator] = gen_three_cluster(120, 5);
  write_dataset(data, cli.path("data.csv"));
  write_model(generator, cli.path("gen.txt"));
  write_conditional_moments(gmm_conditional_moment_sample(generator, 300, 11),
                            cli.path("cms.csv"));

  auto via_model = cli.run("mega --data " + cli.path("data.csv") + " --model " +
                           cli.path("gen.txt") + " --m 300 --seed 11 --out " +
                           cli.path("a"));
  auto via_cms = cli.run("mega --data " + cli.path("data.csv") + " --cms " +
                         cli.path("cms.csv") + " --out " + cli.path("b"));
  REQUIRE(via_model.exit_code == 0);
  REQUIRE(via_cms.exit_code == 0);
  CHECK(std::abs(parse_metric(via_model.out, "1MEGA-F") -
                 parse_metric(via_cms.out, "1MEGA-F")) <= 1e-12);
  CHECK(std::abs(parse_metric(via_model.out, "2MEGA-F") -
                 parse_metric(via_cms.out, "2MEGA-F")) <= 1e-12);

  // Dimension mismatch exits nonzero with a message.
  write_dataset(Dataset(Matrix::Random(10, 3)), cli.path("d3.csv"));
  auto mismatch = cli.run("mega --data " + cli.path("d3.csv") + " --model " +
                          cli.path("gen.txt") + " --out " + cli.path("c"));
  CHECK(mismatch.exit_code != 0);
  CHECK(mismatch.err.find("dimension") != std::string::npos);
}

TEST_CASE("fit and compare round trip", "[cli]") {
  CliFixture cli;
  auto r_gen = cli.run("gen-data --kind three_cluster --n 250 --seed 9 --out " +
                       cli.path("data"));
  REQUIRE(r_gen.exit_code == 0);
  const std::string data_csv = cli.path("data") + "/dataset.csv";

  auto f1 = cli.run("fit --data " + data_csv +
                    " --family gmm --k 1 --seed 4 --out " + cli.path("k1"));
  auto f3 = cli.run("fit --data " + data_csv +
                    " --family gmm --k 3 --seed 4 --out " + cli.path("k3"));
  REQUIRE(f1.exit_code == 0);
  REQUIRE(f3.exit_code == 0);
  CHECK(f3.out.find("loglik = ") != std::string::npos);

  auto fp = cli.run("fit --data " + data_csv +
                    " --family ppca --latent-dim 1 --out " + cli.path("pp"));
  REQUIRE(fp.exit_code == 0);
  CHECK(fp.out.find("sigma2 = ") != std::string::npos);

  auto cmp = cli.run("compare --data " + data_csv + " --model " +
                     cli.path("k1") + "/model.txt --model " + cli.path("k3") +
                     "/model.txt --m 500 --seed 2 --out " + cli.path("cmp"));
  REQUIRE(cmp.exit_code == 0);
  CHECK(fs::exists(cli.path("cmp") + "/ranking.csv"));
  CHECK(fs::exists(cli.path("cmp") + "/report_0.csv"));
  CHECK(fs::exists(cli.path("cmp") + "/sample_1.csv"));
  CHECK(fs::exists(cli.path("cmp") + "/scatter_0.svg"));
  CHECK(read_dataset(cli.path("cmp") + "/sample_0.csv").n() == 500);

  // Comparing a model against itself keeps input order (stable tie handling)
  // and produces identical reports.
  auto self_cmp = cli.run("compare --data " + data_csv + " --model " +
                          cli.path("k3") + "/model.txt --model " + cli.path("k3") +
                          "/model.txt --m 200 --seed 2 --out " + cli.path("self"));
  REQUIRE(self_cmp.exit_code == 0);
  CHECK(CliFixture::slurp(cli.path("self") + "/report_0.csv") ==
        CliFixture::slurp(cli.path("self") + "/report_1.csv"));

  auto too_few = cli.run("compare --data " + data_csv + " --model " +
                         cli.path("k3") + "/model.txt --out " + cli.path("few"));
  CHECK(too_few.exit_code != 0);
}

TEST_CASE("select and path commands", "[cli]") {
  CliFixture cli;
  auto r_gen = cli.run("gen-data --kind three_cluster --n 200 --seed 13 --out " +
                       cli.path("data"));
  REQUIRE(r_gen.exit_code == 0);
  const std::string data_csv = cli.path("data") + "/dataset.csv";

  auto sel = cli.run("select --data " + data_csv +
                     " --k-min 1 --k-max 3 --alpha 0 --alpha 5 --m 200 --seed 3 "
                     "--restarts 2 --tol 1e-4 --out " +
                     cli.path("sel"));
  REQUIRE(sel.exit_code == 0);
  CHECK(sel.out.find("best_by_penalized") != std::string::npos);
  CHECK(fs::exists(cli.path("sel") + "/aic.csv"));
  CHECK(fs::exists(cli.path("sel") + "/path.csv"));
  CHECK(fs::exists(cli.path("sel") + "/selection_alpha_0.csv"));
  CHECK(fs::exists(cli.path("sel") + "/selection_alpha_5.csv"));
  {
    std::ifstream in(cli.path("sel") + "/aic.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "k,loglik,aic,mega1_f,mega2_f,alpha,penalized_objective,seed,m_used");
  }

  auto pth = cli.run("path --data " + data_csv +
                     " --k-min 1 --k-max 3 --alphas 0,1,10 --m 200 --seed 3 "
                     "--restarts 2 --tol 1e-4 --out " +
                     cli.path("path"));
  REQUIRE(pth.exit_code == 0);
  CHECK(fs::exists(cli.path("path") + "/path.csv"));
  // Three alpha blocks of three k rows each, plus the header.
  std::ifstream in(cli.path("path") + "/path.csv");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + 3 * 3);
}

TEST_CASE("gap and variance studies", "[cli]") {
  CliFixture cli;
  write_model(three_cluster_generator(), cli.path("gen.txt"));

  auto gap = cli.run("gap-study --model " + cli.path("gen.txt") +
                     " --m-values 50,200 --n-seeds 5 --seed 1 --out " +
                     cli.path("gap"));
  REQUIRE(gap.exit_code == 0);
  CHECK(fs::exists(cli.path("gap") + "/gaps.csv"));
  CHECK(fs::exists(cli.path("gap") + "/medians.csv"));
  {
    // Paired draws put the fme median at or below the se median even on a
    // tiny grid.
    std::ifstream in(cli.path("gap") + "/medians.csv");
    std::string header, row;
    std::getline(in, header);
    while (std::getline(in, row)) {
      const auto c1 = row.find(','), c2 = row.find(',', row.find(',') + 1);
      const double fme = std::stod(row.substr(c1 + 1, c2 - c1 - 1));
      const double se = std::stod(row.substr(c2 + 1));
      CHECK(fme <= se);
    }
  }

  // Multi-threaded run produces byte-identical output.
  auto gap4 = cli.run("gap-study --model " + cli.path("gen.txt") +
                      " --m-values 50,200 --n-seeds 5 --seed 1 --threads 4 --out " +
                      cli.path("gap4"));
  REQUIRE(gap4.exit_code == 0);
  CHECK(CliFixture::slurp(cli.path("gap") + "/gaps.csv") ==
        CliFixture::slurp(cli.path("gap4") + "/gaps.csv"));

  auto var = cli.run("variance-study --model " + cli.path("gen.txt") +
                     " --m 50 --replications 60 --seed 2 --out " + cli.path("var"));
  REQUIRE(var.exit_code == 0);
  CHECK(fs::exists(cli.path("var") + "/variances.csv"));
  CHECK(parse_metric(var.out, "fraction Var(FME) <= Var(SE)") == 1.0);
}
