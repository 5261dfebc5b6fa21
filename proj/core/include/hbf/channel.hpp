#pragma once

#include "hbf/rng.hpp"
#include "hbf/types.hpp"

#include <cstdint>
#include <vector>

namespace hbf {

/// Uniform linear array. Carrier frequency, wavelength and element distance
/// enter only through spacing_ratio = element distance / wavelength.
struct ArrayGeometry {
  int n_elements = 1;
  double spacing_ratio = 0.5;

  void validate() const;
};

struct Cluster {
  double mean_aod = 0.0;     // radians
  double mean_aoa = 0.0;     // radians
  double spread_aod = 0.0;   // full width, radians
  double spread_aoa = 0.0;   // full width, radians
  double gain_variance = 1.0;
};

/// Clustered geometric scenario: L clusters, N_sc rays in each.
struct ScenarioParams {
  std::vector<Cluster> clusters;
  int rays_per_cluster = 1;

  int cluster_count() const { return static_cast<int>(clusters.size()); }
  void validate() const;
};

/// Per-ray parameters, ordered cluster-major (ray r of cluster l at l*N_sc + r).
struct Ray {
  Complex gain;
  double aoa = 0.0;
  double aod = 0.0;
};

struct ChannelRealization {
  CMatrix h;  // N_R x N_T
  std::vector<Ray> rays;
  int clusters = 0;
  int rays_per_cluster = 0;
  double gamma = 0.0;
};

enum class CovarianceForm { kMonteCarlo, kQuantized };

struct CovarianceMatrix {
  CMatrix r;  // N_T x N_T, Hermitian PSD
  CovarianceForm form = CovarianceForm::kMonteCarlo;
  double resolution = 0.0;  // grid step, quantized form only
};

/// How an SNR in dB maps to a noise variance relative to the mean element
/// power P of the clean matrix.
enum class SnrConvention {
  kPower10,  // sigma^2 = P / 10^(snr/10)
  kPaper20,  // sigma^2 = P / 10^(snr/20)
};

/// a(angle)_k = exp(j 2 pi spacing k sin(angle)) / sqrt(N), k = 0..N-1
CVector steering_vector(double angle, const ArrayGeometry& geometry);

/// gamma = sqrt(N_T N_R / (N_sc L))
double channel_gamma(int n_t, int n_r, int rays_per_cluster, int clusters);

/// Rebuilds H from the stored rays. generate_channel uses the same routine,
/// so a realization always equals assemble_channel of its own rays.
CMatrix assemble_channel(const std::vector<Ray>& rays, double gamma, const ArrayGeometry& tx,
                         const ArrayGeometry& rx);

ChannelRealization generate_channel(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                    const ArrayGeometry& rx, std::uint64_t seed);

/// Copy of `base` with every ray's AOA and AOD shifted and H rebuilt.
ChannelRealization shift_angles(const ChannelRealization& base, double aoa_offset,
                                double aod_offset, const ArrayGeometry& tx,
                                const ArrayGeometry& rx);

/// Scenario with cluster means drawn uniformly from [-pi, pi) and a common
/// angular spread and gain variance.
ScenarioParams random_scenario(int clusters, int rays_per_cluster, double spread,
                               Stream& rng, double gain_variance = 1.0);

inline constexpr int kDefaultCovarianceRealizations = 10000;

/// R = gamma^2 sum_l sigma_l^2 mean(A_T^(l) A_T^(l)H) over drawn ray angles.
CovarianceMatrix covariance_monte_carlo(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                        int n_r, int n_realizations, std::uint64_t seed);

/// Grid of angles mean - spread/2, mean - spread/2 + step, ..., mean + spread/2.
/// A zero spread yields the single point {mean}.
std::vector<double> quantized_angle_grid(double mean, double spread, double step);

CovarianceMatrix covariance_quantized(const ScenarioParams& scenario, const ArrayGeometry& tx,
                                      int n_r, double resolution);

/// Noise variance giving `snr_db` against the mean element power of `clean_power`.
double noise_variance_for_snr(double mean_element_power, double snr_db,
                              SnrConvention convention = SnrConvention::kPower10);

/// M + E with E i.i.d. complex Gaussian. +inf SNR returns M unchanged.
CMatrix corrupt_matrix(const CMatrix& m, double snr_db, std::uint64_t seed,
                       SnrConvention convention = SnrConvention::kPower10);

}  // namespace hbf
