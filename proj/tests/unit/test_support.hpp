#pragma once

#include "hbf/channel.hpp"
#include "hbf/rng.hpp"
#include "hbf/types.hpp"

#include <gtest/gtest.h>

#include <cstdint>

namespace hbf::test {

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Stream rng(seed);
  return complex_gaussian_matrix(rng, rows, cols, 1.0);
}

/// Hermitian PSD matrix A A^H with A n x k Gaussian (full rank when k >= n).
inline CMatrix random_covariance(int n, std::uint64_t seed, int k = 0) {
  const CMatrix a = random_complex(n, k > 0 ? k : n, seed);
  return (a * a.adjoint() + (a * a.adjoint()).adjoint()) / 2.0;
}

/// Clustered channel with its Monte-Carlo covariance.
struct TestLink {
  ScenarioParams scenario;
  ArrayGeometry tx;
  ArrayGeometry rx;
  ChannelRealization channel;
  CMatrix r;
};

inline TestLink random_link(int n_t, int n_r, int clusters, std::uint64_t seed,
                            int realizations = 2000) {
  TestLink link;
  Stream rng(derive_seed(seed, 0));
  link.scenario = random_scenario(clusters, 10, deg_to_rad(5.0), rng);
  link.tx = ArrayGeometry{n_t, 0.5};
  link.rx = ArrayGeometry{n_r, 0.5};
  link.channel = generate_channel(link.scenario, link.tx, link.rx, derive_seed(seed, 1));
  link.r = covariance_monte_carlo(link.scenario, link.tx, n_r, realizations, derive_seed(seed, 2)).r;
  return link;
}

inline double rel_error(const CMatrix& a, const CMatrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace hbf::test
