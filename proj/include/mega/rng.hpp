// Seeded random draws with self-contained distribution transforms, so a
// given seed reproduces identical streams independent of the standard
// library's distribution implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "mega/core.hpp"

namespace mega {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  Vector normal_vector(Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  /// Index draw from the distribution given by nonnegative weights
  /// (normalized internally by their sum).
  Eigen::Index categorical(const Vector& weights) {
    const double total = weights.sum();
    const double u = uniform() * total;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
      acc += weights[j];
      if (u < acc) return j;
    }
    return weights.size() - 1;
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mega
