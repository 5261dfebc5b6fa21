#pragma once

#include "hbf/precoder.hpp"
#include "hbf/types.hpp"

namespace hbf {

struct LinkState {
  CMatrix h;  // N_R x N_T
  HybridBeamformer precoder;
  HybridBeamformer combiner;
  double rho = 1.0;
  double noise_variance = 1.0;
};

/// log2 det(I + rho/N_S Ln^{-1} W^H H F F^H H^H W), Ln = sigma2 W^H W.
/// Throws NumericalError when W is rank deficient.
double spectral_efficiency(const LinkState& link);
double spectral_efficiency(const CMatrix& h, const CMatrix& f, const CMatrix& w, double rho,
                           double noise_variance);

enum class BenchmarkMode { kInstantaneous, kStatistical };

/// Fully digital reference. Instantaneous: top right singular vectors of H
/// with water-filled powers. Statistical: the top eigenvectors of `r` with
/// the same water-filling rule used for hybrid precoders. Both use the MMSE
/// combiner on `h`. `r` is ignored in instantaneous mode.
double fully_digital_benchmark(const CMatrix& h, const CMatrix& r, int n_s, double rho,
                               double noise_variance, BenchmarkMode mode);

/// Fully digital precoder used by the benchmark (N_T x N_S, power N_S).
CMatrix fully_digital_precoder(const CMatrix& h, const CMatrix& r, int n_s, double rho,
                               double noise_variance, BenchmarkMode mode);

/// ||estimate - truth||_F^2 / ||truth||_F^2
double nmse(const CMatrix& estimate, const CMatrix& truth);

/// rho = 10^(snr_db / 10) for unit noise variance.
double snr_db_to_rho(double snr_db);

}  // namespace hbf
