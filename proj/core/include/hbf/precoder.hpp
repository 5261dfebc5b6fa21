#pragma once

#include "hbf/manifold.hpp"
#include "hbf/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hbf {

enum class BeamformerRole { kPrecoder, kCombiner };

/// Analog (unit-modulus) matrix plus baseband matrix. rf is N x N_RF, bb is N_RF x N_S.
struct HybridBeamformer {
  CMatrix rf;
  CMatrix bb;
  BeamformerRole role = BeamformerRole::kPrecoder;

  CMatrix product() const { return rf * bb; }
  int n_rf() const { return static_cast<int>(rf.cols()); }
  int n_s() const { return static_cast<int>(bb.cols()); }
};

/// max_ij ||rf_ij| - 1|
double unit_modulus_error(const CMatrix& rf);

/// Unit modulus within `modulus_tol`; precoders additionally need
/// ||rf bb||_F^2 = N_S within `power_tol`.
bool satisfies_constraints(const HybridBeamformer& bf, double modulus_tol = 1e-12,
                           double power_tol = 1e-9);

/// Top-n_s eigenvectors of R in descending eigenvalue order, each scaled so
/// its largest-magnitude entry is real and positive.
CMatrix statistical_optimal_beamformer(const CMatrix& r, int n_s);

/// Elementwise exp(j arg F). Zero entries get phase 0.
CMatrix phase_extraction_precoder(const CMatrix& f_opt);

/// pinv(rf) * target
CMatrix least_squares_baseband(const CMatrix& rf, const CMatrix& target);

struct WaterFillingResult {
  RVector allocations;  // power per stream, sums to N_S
  double mu = 0.0;      // water level
  RVector eigenvalues;  // eigenvalues of the projected covariance, descending
  CMatrix eigenvectors; // matching eigenvectors (N_RF x N_S)
};

/// Allocations p_n = max(0, mu - n_s / (rho * gain_n)) with sum p_n = n_s.
/// mu is bracketed by bisection to 1e-12 and then fixed exactly on the active set.
/// Fills `allocations` and `mu` only.
WaterFillingResult water_filling_allocation(const RVector& gains, double rho, int n_s);

struct WaterFilledBaseband {
  CMatrix bb;  // N_RF x N_S
  WaterFillingResult wf;
};

/// Baseband precoder (F_RF^H F_RF)^{-1/2} U_M diag(sqrt(p)) for the projected
/// covariance M = U_RF^H R U_RF, with the power law using the squared
/// eigenvalues of M.
WaterFilledBaseband waterfilling_fbb(const CMatrix& f_rf, const CMatrix& r, double rho, int n_s);

struct AlternatingOptions {
  ManifoldOptions manifold;
  int max_outer = 50;
  double outer_tol = 1e-6;
  std::uint64_t seed = 0;  // initial RF phases
  /// Starting F_RF (unit modulus, N_T x N_RF); overrides the seeded random start.
  std::optional<CMatrix> initial_rf;
};

struct PrecoderSolution {
  HybridBeamformer beamformer;
  CMatrix f_opt;
  /// ||F_opt - F_RF F_BB||_F with the least-squares F_BB, at init and after each outer pass.
  std::vector<double> residual_history;
  WaterFillingResult wf;
  int outer_iterations = 0;
  bool converged = false;
  int inner_failures = 0;  // manifold solves that ended on an Armijo failure

  double relative_residual() const;
};

/// Alternating manifold-CG / least-squares fit of F_RF F_BB to F_opt(R),
/// followed by the water-filling baseband precoder.
PrecoderSolution alternating_hybrid_precoder(const CMatrix& r, int n_rf, int n_s, double rho,
                                             const AlternatingOptions& options = {});

/// Phase-extraction baseline: F_RF = exp(j arg V) for the top n_rf
/// eigenvectors V of R (equal to the F_opt phases when n_rf = n_s).
CMatrix phase_extraction_rf(const CMatrix& r, int n_rf);

/// Phase-extraction F_RF with a water-filled F_BB.
HybridBeamformer phase_extraction_hybrid_precoder(const CMatrix& r, int n_rf, int n_s, double rho);

/// log2 det(I + rho/N_S F_BB^H F_RF^H R F_RF F_BB)
double mutual_information(const CMatrix& r, const CMatrix& f_rf, const CMatrix& f_bb, double rho);

}  // namespace hbf
