#pragma once

#include "hbf/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace hbf {

/// Downlink preamble beams. The transmitter sounds M_T beams (columns of
/// tx_beams) and the receiver combines with M_R beams (columns of rx_beams).
struct PilotConfig {
  CMatrix tx_beams;       // N_T x M_T
  CMatrix rx_beams;       // N_R x M_R
  CVector pilot_symbols;  // diagonal of S, length M_T

  int n_t() const { return static_cast<int>(tx_beams.rows()); }
  int n_r() const { return static_cast<int>(rx_beams.rows()); }
  int m_t() const { return static_cast<int>(tx_beams.cols()); }
  int m_r() const { return static_cast<int>(rx_beams.cols()); }

  /// ceil(M_R / N_RF): channel uses needed when only n_rf combiners run at once.
  int channel_uses(int n_rf) const;

  void validate() const;
};

/// First m columns of the unitary n-point DFT matrix, (1/sqrt n) exp(-j 2 pi k l / n).
CMatrix dft_beam_matrix(int n, int m);

/// DFT-beam preamble with identity pilot symbols.
PilotConfig make_dft_pilot(int n_t, int n_r, int m_t, int m_r);

/// Ybar = W^H H F S + W^H N with N i.i.d. CN(0, noise_variance).
CMatrix simulate_preamble_with_variance(const CMatrix& h, const PilotConfig& cfg,
                                        double noise_variance, std::uint64_t seed);

/// Same, with the variance set so that the mean power of the entries of H F S
/// over the noise variance equals snr_db. +inf is noiseless.
CMatrix simulate_preamble(const CMatrix& h, const PilotConfig& cfg, double snr_db,
                          std::uint64_t seed);

struct IceResult {
  CMatrix y;  // N_R x N_T
  bool ill_conditioned = false;
};

/// Initial channel estimate Y = T_T Ybar T_R.
IceResult initial_channel_estimate(const CMatrix& ybar, const PilotConfig& cfg);

struct OmpOptions {
  int grid_size = 64;
  int sparsity = 1;
  double spacing_ratio = 0.5;
  /// Stop early once ||residual||^2 <= residual_tol * ||Ybar||^2.
  double residual_tol = 1e-14;
};

struct OmpResult {
  CMatrix h;  // N_R x N_T channel estimate
  std::vector<double> residual_history;  // ||residual||_F after each atom, starting with ||Ybar||_F
  std::vector<std::pair<int, int>> support;  // (rx grid index, tx grid index)
  bool converged = true;
};

/// Uniform angle grid over [-pi/2, pi/2) with grid_size points.
std::vector<double> omp_angle_grid(int grid_size);

/// Orthogonal matching pursuit over the receive x transmit steering
/// dictionary observed through the preamble beams.
OmpResult reference_estimator_omp(const CMatrix& ybar, const PilotConfig& cfg,
                                  const OmpOptions& options);

struct PilotObservation {
  CMatrix ybar;  // M_R x M_T raw preamble
  CMatrix ice;   // N_R x N_T initial estimate
};

struct ReferenceEstimate {
  CMatrix h;
  bool ok = true;
};

/// Analytical channel estimator used as the label source during online
/// adaptation.
class ReferenceEstimator {
 public:
  virtual ~ReferenceEstimator() = default;
  virtual ReferenceEstimate estimate(const PilotObservation& obs) const = 0;
};

class OmpReferenceEstimator final : public ReferenceEstimator {
 public:
  OmpReferenceEstimator(PilotConfig cfg, OmpOptions options);
  ReferenceEstimate estimate(const PilotObservation& obs) const override;

 private:
  PilotConfig cfg_;
  OmpOptions options_;
};

/// Test double: returns whatever the supplied callback reports as the channel.
class OracleReferenceEstimator final : public ReferenceEstimator {
 public:
  explicit OracleReferenceEstimator(std::function<CMatrix()> truth);
  ReferenceEstimate estimate(const PilotObservation& obs) const override;

 private:
  std::function<CMatrix()> truth_;
};

}  // namespace hbf
