#pragma once

#include "hbf/manifold.hpp"
#include "hbf/precoder.hpp"
#include "hbf/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hbf {

// Scaling convention: the received signal is y = sqrt(rho) H F s + n with
// E{s s^H} = I / N_S and E{n n^H} = sigma2 I. With that convention the MMSE
// combiner below makes W^H sqrt(rho) H F tend to I as sigma2 -> 0.

struct ReceiveStatistics {
  CMatrix covariance;  // Lambda_y, N_R x N_R
  CMatrix w_mmse;      // N_R x N_S
  double rho = 0.0;
  double noise_variance = 0.0;
};

/// W_MMSE^H = (1/sqrt(rho)) (Heff^H Heff + N_S sigma2 / rho I)^{-1} Heff^H, Heff = H F_RF F_BB.
/// Falls back to a pseudo-inverse when the regularized Gram is singular.
CMatrix mmse_combiner(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb, double rho,
                      double noise_variance);

/// rho H F F^H H^H + sigma2 I
CMatrix receive_covariance(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb, double rho,
                           double noise_variance);

ReceiveStatistics receive_statistics(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb,
                                     double rho, double noise_variance);

struct BasebandCombiner {
  CMatrix bb;  // N_RF x N_S
  bool pinv_fallback = false;
};

/// (W_RF^H L W_RF)^{-1} W_RF^H L W_MMSE
BasebandCombiner wbb_closed_form(const CMatrix& w_rf, const CMatrix& lambda, const CMatrix& w_mmse);

/// ||L^{1/2} (W_MMSE - W_RF W_BB)||_F, computed as sqrt(tr(E^H L E)).
double weighted_combiner_residual(const CMatrix& w_rf, const CMatrix& w_bb, const CMatrix& lambda,
                                  const CMatrix& w_mmse);

struct CombinerOptions {
  ManifoldOptions manifold;
  int max_outer = 50;
  double outer_tol = 1e-6;
  std::uint64_t seed = 0;
  /// Starting W_RF (unit modulus, N_R x N_RF); overrides the seeded random start.
  std::optional<CMatrix> initial_rf;
  /// Fit W_RF against the Lambda-weighted residual instead of the plain one.
  bool weighted_rf_objective = false;
};

struct CombinerSolution {
  HybridBeamformer beamformer;  // role = combiner
  ReceiveStatistics stats;
  std::vector<double> weighted_residual_history;
  std::vector<double> unweighted_residual_history;
  int outer_iterations = 0;
  bool converged = false;
  int inner_failures = 0;
  /// Outer passes whose W_RF update was discarded because it raised the weighted residual.
  int rejected_updates = 0;
  bool pinv_fallback = false;
};

CombinerSolution alternating_hybrid_combiner(const CMatrix& h, const CMatrix& f_rf,
                                             const CMatrix& f_bb, double rho, double noise_variance,
                                             int n_rf, const CombinerOptions& options = {});

/// Phase-extraction baseline: W_RF from the phases of W_MMSE (n_rf = N_S) or
/// of the top n_rf eigenvectors of Lambda_y, with the closed-form W_BB.
HybridBeamformer phase_extraction_hybrid_combiner(const CMatrix& h, const CMatrix& f_rf,
                                                  const CMatrix& f_bb, double rho,
                                                  double noise_variance, int n_rf);

}  // namespace hbf
