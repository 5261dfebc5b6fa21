#include "hbf/rng.hpp"

#include <cmath>

namespace hbf {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

Stream::Stream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Stream Stream::split(std::uint64_t index) const { return Stream(derive_seed(seed_, index)); }

// Distributions are written out by hand so that sequences do not depend on the
// standard library's (unspecified) distribution algorithms.
double Stream::uniform(double lo, double hi) {
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Stream::normal() {
  // Box-Muller, discarding the second variate to stay stateless.
  double u1 = 0.0;
  do {
    u1 = uniform(0.0, 1.0);
  } while (u1 <= 0.0);
  const double u2 = uniform(0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Complex Stream::complex_normal(double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

CMatrix complex_gaussian_matrix(Stream& rng, Eigen::Index rows, Eigen::Index cols,
                                double variance) {
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = rng.complex_normal(variance);
    }
  }
  return m;
}

}  // namespace hbf
