// Synthetic data generators used by the experiments: a fixed 2-D
// three-cluster mixture (returned together with its generating model so it
// can serve as an oracle) and the standard two-interleaving-moons set.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/gmm.hpp"
#include "mega/rng.hpp"

namespace mega {

/// The fixed generating model behind gen_three_cluster: equal weights,
/// means (0,0), (4,0), (2,3.5), covariances 0.5 * I.
inline GmmModel three_cluster_generator() {
  Vector weights(3);
  weights << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0;
  std::vector<Vector> means(3, Vector(2));
  means[0] << 0.0, 0.0;
  means[1] << 4.0, 0.0;
  means[2] << 2.0, 3.5;
  std::vector<Matrix> covs(3, 0.5 * Matrix::Identity(2, 2));
  return GmmModel(std::move(weights), std::move(means), std::move(covs));
}

struct ThreeClusterData {
  Dataset data;
  GmmModel generator;
};

inline ThreeClusterData gen_three_cluster(std::int64_t n, std::uint64_t seed) {
  if (n < 3) throw InvalidInputError("gen_three_cluster: n must be >= 3");
  GmmModel generator = three_cluster_generator();
  Dataset data = gmm_ancestral_sample(generator, n, seed);
  return {std::move(data), std::move(generator)};
}

/// Two interleaving half-circles: n/2 points on the upper half-circle of
/// radius 1 centered at the origin, the rest on the downward-reflected
/// half-circle centered at (1, 0.5), each perturbed by isotropic Gaussian
/// noise of standard deviation `noise`.
inline Dataset gen_moons(std::int64_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw InvalidInputError("gen_moons: n must be >= 2");
  if (!(noise >= 0.0)) throw InvalidInputError("gen_moons: noise must be >= 0");
  Rng rng(seed);
  const std::int64_t n_upper = n / 2;
  const std::int64_t n_lower = n - n_upper;
  Matrix rows(n, 2);
  auto arc_t = [](std::int64_t i, std::int64_t count) {
    if (count == 1) return 0.0;
    return std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  for (std::int64_t i = 0; i < n_upper; ++i) {
    const double t = arc_t(i, n_upper);
    rows(i, 0) = std::cos(t) + noise * rng.normal();
    rows(i, 1) = std::sin(t) + noise * rng.normal();
  }
  for (std::int64_t i = 0; i < n_lower; ++i) {
    const double t = arc_t(i, n_lower);
    rows(n_upper + i, 0) = 1.0 - std::cos(t) + noise * rng.normal();
    rows(n_upper + i, 1) = 0.5 - std::sin(t) + noise * rng.normal();
  }
  return Dataset(std::move(rows));
}

}  // namespace mega
