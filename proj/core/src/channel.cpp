#include "hbf/channel.hpp"

#include "hbf/linalg.hpp"

#include <cmath>
#include <string>

namespace hbf {

void ArrayGeometry::validate() const {
  if (n_elements < 1) {
    throw std::invalid_argument("ArrayGeometry: n_elements must be >= 1");
  }
  if (!(spacing_ratio > 0.0)) {
    throw std::invalid_argument("ArrayGeometry: spacing_ratio must be > 0");
  }
}

void ScenarioParams::validate() const {
  if (clusters.empty()) {
    throw std::invalid_argument("ScenarioParams: at least one cluster is required");
  }
  if (rays_per_cluster < 1) {
    throw std::invalid_argument("ScenarioParams: rays_per_cluster must be >= 1");
  }
  for (std::size_t l = 0; l < clusters.size(); ++l) {
    const Cluster& c = clusters[l];
    if (c.spread_aod < 0.0 || c.spread_aoa < 0.0) {
      throw std::invalid_argument("ScenarioParams: cluster " + std::to_string(l) +
                                  " has a negative angular spread");
    }
    if (!(c.gain_variance > 0.0)) {
      throw std::invalid_argument("ScenarioParams: cluster " + std::to_string(l) +
                                  " has a non-positive gain variance");
    }
  }
}

CVector steering_vector(double angle, const ArrayGeometry& geometry) {
  geometry.validate();
  const int n = geometry.n_elements;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double step = 2.0 * kPi * geometry.spacing_ratio * std::sin(angle);
  CVector a(n);
  for (int k = 0; k < n; ++k) {
    a(k) = std::polar(scale, step * k);
  }
  return a;
}

double channel_gamma(int n_t, int n_r, int rays_per_cluster, int clusters) {
  return std::sqrt(static_cast<double>(n_t) * n_r / (static_cast<double>(rays_per_cluster) * clusters));
}

CMatrix assemble_channel(const std::vector<Ray>& rays, double gamma, const ArrayGeometry& tx,
                         const ArrayGeometry& rx) {
  CMatrix h = CMatrix::Zero(rx.n_elements, tx.n_elements);
  for (const Ray& ray : rays) {
    const CVector ar = steering_vector(ray.aoa, rx);
    const CVector at = steering_vector(ray.aod, tx);
    h.noalias() += ray.gain * ar * at.adjoint();
  }
  h *= gamma;
  return h;
}

ChannelRealization generate_channel(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                    const ArrayGeometry& rx, std::uint64_t seed) {
  scenario.validate();
  tx.validate();
  rx.validate();
  Stream rng(seed);
  ChannelRealization out;
  out.clusters = scenario.cluster_count();
  out.rays_per_cluster = scenario.rays_per_cluster;
  out.gamma = channel_gamma(tx.n_elements, rx.n_elements, out.rays_per_cluster, out.clusters);
  out.rays.reserve(static_cast<std::size_t>(out.clusters * out.rays_per_cluster));
  for (const Cluster& c : scenario.clusters) {
    for (int r = 0; r < scenario.rays_per_cluster; ++r) {
      Ray ray;
      ray.aod = c.mean_aod + rng.uniform(-0.5, 0.5) * c.spread_aod;
      ray.aoa = c.mean_aoa + rng.uniform(-0.5, 0.5) * c.spread_aoa;
      ray.gain = rng.complex_normal(c.gain_variance);
      out.rays.push_back(ray);
    }
  }
  out.h = assemble_channel(out.rays, out.gamma, tx, rx);
  return out;
}

ChannelRealization shift_angles(const ChannelRealization& base, double aoa_offset,
                                double aod_offset, const ArrayGeometry& tx,
                                const ArrayGeometry& rx) {
  ChannelRealization out = base;
  for (Ray& ray : out.rays) {
    ray.aoa += aoa_offset;
    ray.aod += aod_offset;
  }
  out.h = assemble_channel(out.rays, out.gamma, tx, rx);
  return out;
}

ScenarioParams random_scenario(int clusters, int rays_per_cluster, double spread, Stream& rng,
                               double gain_variance) {
  ScenarioParams s;
  s.rays_per_cluster = rays_per_cluster;
  s.clusters.resize(static_cast<std::size_t>(clusters));
  for (Cluster& c : s.clusters) {
    c.mean_aod = rng.uniform(-kPi, kPi);
    c.mean_aoa = rng.uniform(-kPi, kPi);
    c.spread_aod = spread;
    c.spread_aoa = spread;
    c.gain_variance = gain_variance;
  }
  return s;
}

CovarianceMatrix covariance_monte_carlo(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                        int n_r, int n_realizations, std::uint64_t seed) {
  scenario.validate();
  tx.validate();
  if (n_realizations < 1) {
    throw std::invalid_argument("covariance_monte_carlo: n_realizations must be >= 1");
  }
  const int n_t = tx.n_elements;
  const double gamma = channel_gamma(n_t, n_r, scenario.rays_per_cluster, scenario.cluster_count());
  Stream rng(seed);
  CMatrix r = CMatrix::Zero(n_t, n_t);
  CMatrix steering(n_t, scenario.rays_per_cluster);
  for (const Cluster& c : scenario.clusters) {
    CMatrix acc = CMatrix::Zero(n_t, n_t);
    for (int it = 0; it < n_realizations; ++it) {
      for (int k = 0; k < scenario.rays_per_cluster; ++k) {
        steering.col(k) = steering_vector(c.mean_aod + rng.uniform(-0.5, 0.5) * c.spread_aod, tx);
      }
      acc.noalias() += steering * steering.adjoint();
    }
    r += (c.gain_variance / n_realizations) * acc;
  }
  r *= gamma * gamma;
  CovarianceMatrix out;
  out.r = linalg::hermitian_part(r);
  out.form = CovarianceForm::kMonteCarlo;
  return out;
}

std::vector<double> quantized_angle_grid(double mean, double spread, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("quantized_angle_grid: resolution must be > 0");
  }
  if (spread < 0.0) {
    throw std::invalid_argument("quantized_angle_grid: spread must be >= 0");
  }
  if (spread == 0.0) {
    return {mean};
  }
  if (step > spread * (1.0 + 1e-12)) {
    throw std::invalid_argument("quantized_angle_grid: resolution exceeds the angular spread");
  }
  const double lo = mean - spread / 2.0;
  const double hi = mean + spread / 2.0;
  const auto count = static_cast<long>(std::floor(spread / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count + 2));
  for (long k = 0; k <= count; ++k) {
    grid.push_back(lo + static_cast<double>(k) * step);
  }
  // The upper endpoint belongs to the set even when spread/step is fractional.
  if (hi - grid.back() > 1e-9 * step) {
    grid.push_back(hi);
  }
  return grid;
}

CovarianceMatrix covariance_quantized(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                      int n_r, double resolution) {
  scenario.validate();
  tx.validate();
  const int n_t = tx.n_elements;
  const double gamma = channel_gamma(n_t, n_r, scenario.rays_per_cluster, scenario.cluster_count());
  CMatrix r = CMatrix::Zero(n_t, n_t);
  for (const Cluster& c : scenario.clusters) {
    for (double angle : quantized_angle_grid(c.mean_aod, c.spread_aod, resolution)) {
      const CVector a = steering_vector(angle, tx);
      r.noalias() += c.gain_variance * a * a.adjoint();
    }
  }
  r *= gamma * gamma;
  CovarianceMatrix out;
  out.r = linalg::hermitian_part(r);
  out.form = CovarianceForm::kQuantized;
  out.resolution = resolution;
  return out;
}

double noise_variance_for_snr(double mean_element_power, double snr_db, SnrConvention convention) {
  if (std::isinf(snr_db) && snr_db > 0) {
    return 0.0;
  }
  const double divisor = convention == SnrConvention::kPower10 ? 10.0 : 20.0;
  return mean_element_power / std::pow(10.0, snr_db / divisor);
}

CMatrix corrupt_matrix(const CMatrix& m, double snr_db, std::uint64_t seed,
                       SnrConvention convention) {
  if (m.size() == 0) {
    throw std::invalid_argument("corrupt_matrix: empty matrix");
  }
  const double power = m.squaredNorm() / static_cast<double>(m.size());
  if (!(power > 0.0)) {
    throw std::invalid_argument("corrupt_matrix: all-zero matrix has undefined SNR");
  }
  const double variance = noise_variance_for_snr(power, snr_db, convention);
  if (variance == 0.0) {
    return m;
  }
  Stream rng(seed);
  return m + complex_gaussian_matrix(rng, m.rows(), m.cols(), variance);
}

}  // namespace hbf
