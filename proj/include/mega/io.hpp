// File formats: dataset CSV, conditional-moment CSV (the bridge for
// externally trained models), plain-text model files, and the result
// tables. All numeric output uses 17 significant digits so that
// write-then-read round-trips are value-exact.
#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/gmm.hpp"
#include "mega/moments.hpp"
#include "mega/ppca.hpp"
#include "mega/selection.hpp"

namespace mega {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& cell, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(where + ": cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(v)) {
    throw ParseError(where + ": non-finite value '" + cell + "'");
  }
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  return out;
}

inline void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw ParseError(path + ": write failed");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV: one observation per line, comma-separated decimal floats,
// '#' lines ignored.

inline void write_dataset(const Dataset& s, const std::string& path) {
  auto out = detail::open_for_write(path);
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    for (Eigen::Index j = 0; j < s.dim(); ++j) {
      if (j > 0) out << ',';
      out << format_double(s.rows()(i, j));
    }
    out << '\n';
  }
  detail::finish_write(out, path);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  Eigen::Index d = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = detail::split(t, ',');
    const std::string where = path + ":" + std::to_string(line_no);
    if (d < 0) {
      d = static_cast<Eigen::Index>(cells.size());
    } else if (static_cast<Eigen::Index>(cells.size()) != d) {
      throw ParseError(where + ": expected " + std::to_string(d) + " columns, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_double(detail::trim(c), where));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Matrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return Dataset(std::move(m));
}

// ---------------------------------------------------------------------------
// Conditional-moment CSV. Header: `# mega-cms v1 d=<D> var=<diag|full>`.
// diag rows: D means then D variances. full rows: D means then D*D row-major
// covariance entries.

inline void write_conditional_moments(const ConditionalMomentSample& cms,
                                      const std::string& path) {
  auto out = detail::open_for_write(path);
  const Eigen::Index d = cms.dim();
  const bool diag = cms.representation() == VarianceRepr::diagonal;
  out << "# mega-cms v1 d=" << d << " var=" << (diag ? "diag" : "full") << '\n';
  for (Eigen::Index i = 0; i < cms.m(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j > 0) out << ',';
      out << format_double(cms.means()(i, j));
    }
    if (diag) {
      for (Eigen::Index j = 0; j < d; ++j) {
        out << ',' << format_double(cms.diagonal_variances()(i, j));
      }
    } else {
      const Matrix& v = cms.full_variances()[static_cast<std::size_t>(i)];
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) out << ',' << format_double(v(r, c));
      }
    }
    out << '\n';
  }
  detail::finish_write(out, path);
}

inline ConditionalMomentSample read_conditional_moments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path + ": empty file");
  header = detail::trim(header);

  Eigen::Index d = -1;
  std::optional<VarianceRepr> repr;
  {
    std::stringstream ss(header);
    std::string tok;
    ss >> tok;  // '#'
    std::string name, version;
    ss >> name >> version;
    if (tok != "#" || name != "mega-cms" || version != "v1") {
      throw ParseError(path + ":1: expected header '# mega-cms v1 d=<D> var=<diag|full>'");
    }
    while (ss >> tok) {
      if (tok.rfind("d=", 0) == 0) {
        d = static_cast<Eigen::Index>(
            detail::parse_double(tok.substr(2), path + ":1 (d)"));
      } else if (tok.rfind("var=", 0) == 0) {
        const std::string v = tok.substr(4);
        if (v == "diag") repr = VarianceRepr::diagonal;
        else if (v == "full") repr = VarianceRepr::full;
        else throw ParseError(path + ":1: unknown variance representation '" + v + "'");
      } else {
        throw ParseError(path + ":1: unknown header field '" + tok + "'");
      }
    }
  }
  if (d < 1 || !repr) throw ParseError(path + ":1: header must set d and var");

  const Eigen::Index row_len = (*repr == VarianceRepr::diagonal) ? 2 * d : d + d * d;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = detail::split(t, ',');
    const std::string where = path + ":" + std::to_string(line_no) + " (row " +
                              std::to_string(rows.size() + 1) + ")";
    if (static_cast<Eigen::Index>(cells.size()) != row_len) {
      throw ParseError(where + ": expected " + std::to_string(row_len) +
                       " values, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(detail::parse_double(detail::trim(c), where));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no draws");

  const auto m = static_cast<Eigen::Index>(rows.size());
  Matrix means(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) means(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  try {
    if (*repr == VarianceRepr::diagonal) {
      Matrix variances(m, d);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
          variances(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d + j)];
        }
      }
      return ConditionalMomentSample(std::move(means), std::move(variances));
    }
    std::vector<Matrix> variances;
    variances.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      Matrix v(d, d);
      for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
          v(r, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d + r * d + c)];
        }
      }
      variances.push_back(std::move(v));
    }
    return ConditionalMomentSample(std::move(means), std::move(variances));
  } catch (const InvalidInputError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model files: line-oriented `key = value` with a family tag.

using AnyModel = std::variant<GmmModel, PpcaModel>;

inline void write_model(const GmmModel& g, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "family = gmm\n";
  out << "d = " << g.dim() << '\n';
  out << "k = " << g.k() << '\n';
  out << "weights =";
  for (Eigen::Index j = 0; j < g.k(); ++j) out << ' ' << format_double(g.weights()[j]);
  out << '\n';
  for (Eigen::Index j = 0; j < g.k(); ++j) {
    out << "mean." << j << " =";
    for (Eigen::Index i = 0; i < g.dim(); ++i) out << ' ' << format_double(g.mean(j)[i]);
    out << '\n';
    out << "cov." << j << " =";
    for (Eigen::Index r = 0; r < g.dim(); ++r) {
      for (Eigen::Index c = 0; c < g.dim(); ++c) {
        out << ' ' << format_double(g.covariance(j)(r, c));
      }
    }
    out << '\n';
  }
  detail::finish_write(out, path);
}

inline void write_model(const PpcaModel& p, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "family = ppca\n";
  out << "d = " << p.dim() << '\n';
  out << "M = " << p.latent_dim() << '\n';
  out << "w =";
  for (Eigen::Index r = 0; r < p.dim(); ++r) {
    for (Eigen::Index c = 0; c < p.latent_dim(); ++c) out << ' ' << format_double(p.w()(r, c));
  }
  out << '\n';
  out << "b =";
  for (Eigen::Index i = 0; i < p.dim(); ++i) out << ' ' << format_double(p.b()[i]);
  out << '\n';
  out << "sigma2 = " << format_double(p.sigma2()) << '\n';
  detail::finish_write(out, path);
}

inline void write_model(const AnyModel& model, const std::string& path) {
  std::visit([&](const auto& m) { write_model(m, path); }, model);
}

namespace detail {

struct KeyValueFile {
  std::map<std::string, std::string> entries;
  std::string path;

  const std::string& require(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) throw ParseError(path + ": missing key '" + key + "'");
    return it->second;
  }

  std::vector<double> require_values(const std::string& key, std::size_t count) const {
    const auto cells = split_ws(require(key));
    if (cells.size() != count) {
      throw ParseError(path + ": key '" + key + "' expects " + std::to_string(count) +
                       " values, got " + std::to_string(cells.size()));
    }
    std::vector<double> out;
    out.reserve(count);
    for (const auto& c : cells) out.push_back(parse_double(c, path + " (" + key + ")"));
    return out;
  }

  long require_int(const std::string& key) const {
    const double v = parse_double(require(key), path + " (" + key + ")");
    const long i = static_cast<long>(v);
    if (static_cast<double>(i) != v) {
      throw ParseError(path + ": key '" + key + "' must be an integer");
    }
    return i;
  }

  static std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }
};

inline KeyValueFile read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  KeyValueFile kv;
  kv.path = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!kv.entries.emplace(key, value).second) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

}  // namespace detail

inline AnyModel read_model(const std::string& path) {
  const auto kv = detail::read_key_value_file(path);
  const std::string family = kv.require("family");
  if (family == "gmm") {
    const long d = kv.require_int("d");
    const long k = kv.require_int("k");
    if (d < 1 || k < 1) throw ParseError(path + ": d and k must be >= 1");
    const auto wts = kv.require_values("weights", static_cast<std::size_t>(k));
    Vector weights = Eigen::Map<const Vector>(wts.data(), k);
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (long j = 0; j < k; ++j) {
      const auto mv = kv.require_values("mean." + std::to_string(j),
                                        static_cast<std::size_t>(d));
      means.push_back(Eigen::Map<const Vector>(mv.data(), d));
      const auto cv = kv.require_values("cov." + std::to_string(j),
                                        static_cast<std::size_t>(d * d));
      Matrix c(d, d);
      for (long r = 0; r < d; ++r) {
        for (long col = 0; col < d; ++col) c(r, col) = cv[static_cast<std::size_t>(r * d + col)];
      }
      covs.push_back(std::move(c));
    }
    return GmmModel(std::move(weights), std::move(means), std::move(covs));
  }
  if (family == "ppca") {
    const long d = kv.require_int("d");
    const long latent = kv.require_int("M");
    if (d < 1 || latent < 1) throw ParseError(path + ": d and M must be >= 1");
    const auto wv = kv.require_values("w", static_cast<std::size_t>(d * latent));
    Matrix w(d, latent);
    for (long r = 0; r < d; ++r) {
      for (long c = 0; c < latent; ++c) w(r, c) = wv[static_cast<std::size_t>(r * latent + c)];
    }
    const auto bv = kv.require_values("b", static_cast<std::size_t>(d));
    Vector b = Eigen::Map<const Vector>(bv.data(), d);
    const double sigma2 = detail::parse_double(kv.require("sigma2"), path + " (sigma2)");
    return PpcaModel(std::move(w), std::move(b), sigma2);
  }
  throw ParseError(path + ": unknown family tag '" + family + "'");
}

// ---------------------------------------------------------------------------
// Result tables.

inline void write_selection_csv(const std::vector<SelectionResult>& results,
                                const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "k,loglik,aic,mega1_f,mega2_f,alpha,penalized_objective,seed,m_used\n";
  for (const auto& result : results) {
    for (const auto& e : result.entries) {
      out << e.k << ',' << format_double(e.loglik) << ',' << format_double(e.aic) << ','
          << format_double(e.mega1_f) << ',' << format_double(e.mega2_f) << ','
          << format_double(e.alpha) << ',' << format_double(e.penalized_objective)
          << ',' << e.seed << ',' << e.m_used << '\n';
    }
  }
  detail::finish_write(out, path);
}

inline void write_selection_csv(const SelectionResult& result, const std::string& path) {
  write_selection_csv(std::vector<SelectionResult>{result}, path);
}

/// Long-format report: the scalar metrics plus every gap coordinate, so
/// downstream tools can localize which entries mismatch.
inline void write_mega_report_csv(const MegaReport& r, const std::string& path) {
  auto out = detail::open_for_write(path);
  const Eigen::Index d = r.gap1.size();
  out << "# mega-report v1 d=" << d << '\n';
  out << "quantity,i,j,value\n";
  out << "mega1_f,,," << format_double(r.mega1_f) << '\n';
  out << "mega2_f,,," << format_double(r.mega2_f) << '\n';
  out << "m_used,,," << r.m_used << '\n';
  out << "seed,,,";
  if (r.seed) out << *r.seed;
  out << '\n';
  for (Eigen::Index i = 0; i < d; ++i) {
    out << "gap1," << i << ",," << format_double(r.gap1[i]) << '\n';
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out << "gap2," << i << ',' << j << ',' << format_double(r.gap2(i, j)) << '\n';
    }
  }
  detail::finish_write(out, path);
}

}  // namespace mega
