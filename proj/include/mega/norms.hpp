// Vector and matrix norms used to collapse moment gaps into scalars:
// the entrywise q-norm family, its q=2 special case (Frobenius), and a
// power-iteration estimate of the operator norm.
#pragma once

#include <cmath>
#include <cstdlib>

#include "mega/core.hpp"
#include "mega/rng.hpp"
#include "mega/sym_matrix.hpp"

namespace mega {

/// |v|_q = (sum_i |v_i|^q)^(1/q), q >= 1.
inline double vector_qnorm(const Vector& v, double q) {
  if (v.size() == 0) throw InvalidInputError("vector_qnorm: empty vector");
  if (!(q >= 1.0)) throw InvalidInputError("vector_qnorm: q must be >= 1");
  if (!all_finite(v)) throw InvalidInputError("vector_qnorm: entries must be finite");
  if (q == 1.0) return v.array().abs().sum();
  if (q == 2.0) return std::sqrt(v.array().square().sum());
  return std::pow(v.array().abs().pow(q).sum(), 1.0 / q);
}

/// Entrywise Frobenius norm (sum of squares, not via the trace identity;
/// tests cross-check against an eigenvalue route).
inline double frobenius_norm(const Matrix& m) {
  if (m.size() == 0) throw InvalidInputError("frobenius_norm: empty matrix");
  if (!all_finite(m)) throw InvalidInputError("frobenius_norm: entries must be finite");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      sum += m(i, j) * m(i, j);
    }
  }
  return std::sqrt(sum);
}

inline double frobenius_norm(const SymMatrix& m) { return frobenius_norm(m.mat()); }

struct OperatorNormResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest-magnitude eigenvalue of a symmetric matrix, estimated by power
/// (von Mises) iteration. Starts from the normalized all-ones vector and
/// stops when successive Rayleigh-quotient estimates differ by less than
/// tol; reseeds once with a deterministic random unit vector if the start
/// vector turns out to be annihilated by the matrix or the Rayleigh
/// estimate stagnates at zero.
inline OperatorNormResult operator_norm(const SymMatrix& m, double tol = 1e-10,
                                        int max_iter = 1000) {
  if (!(tol > 0.0)) throw InvalidInputError("operator_norm: tol must be > 0");
  if (max_iter < 1) throw InvalidInputError("operator_norm: max_iter must be >= 1");

  const Matrix& a = m.mat();
  const Eigen::Index d = a.rows();
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return {0.0, true, 0};

  Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  bool reseeded = false;
  double rayleigh = v.dot(a * v);
  OperatorNormResult result;
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = a * v;
    const double wnorm = w.norm();
    if (wnorm <= scale * 1e-15 && !reseeded) {
      // Start vector lies in the kernel; retry from a seeded random direction.
      Rng rng(0x6d656761u);
      v = rng.normal_vector(d).normalized();
      rayleigh = v.dot(a * v);
      reseeded = true;
      continue;
    }
    if (wnorm == 0.0) break;
    v = w / wnorm;
    const double next = v.dot(a * v);
    const double diff = std::abs(next - rayleigh);
    rayleigh = next;
    result.iterations = it;
    if (diff < tol) {
      if (std::abs(rayleigh) <= scale * 1e-14 && !reseeded) {
        // Stagnation at zero with a nonzero matrix: the ones vector is
        // orthogonal to the dominant eigenspace.
        Rng rng(0x6d656761u);
        v = rng.normal_vector(d).normalized();
        rayleigh = v.dot(a * v);
        reseeded = true;
        continue;
      }
      result.converged = true;
      break;
    }
  }
  result.value = std::abs(rayleigh);
  return result;
}

}  // namespace mega
