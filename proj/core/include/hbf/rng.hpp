#pragma once

#include "hbf/types.hpp"

#include <cstdint>
#include <random>

namespace hbf {

/// Seedable, splittable random stream.
///
/// Every stochastic routine in the library takes either a seed or a Stream.
/// Child streams are derived by hashing (parent seed, index) with SplitMix64,
/// so parallel workers can draw from independent, replayable sequences
/// without sharing state.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream keyed by `index`.
  Stream split(std::uint64_t index) const;

  double uniform(double lo, double hi);
  double normal();
  /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  Complex complex_normal(double variance);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the index-th child of `seed`; same value Stream(seed).split(index) uses.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Matrix of i.i.d. CN(0, variance) entries.
CMatrix complex_gaussian_matrix(Stream& rng, Eigen::Index rows, Eigen::Index cols,
                                double variance);

}  // namespace hbf
