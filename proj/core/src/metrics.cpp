#include "hbf/metrics.hpp"

#include "hbf/combiner.hpp"
#include "hbf/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace hbf {

double spectral_efficiency(const CMatrix& h, const CMatrix& f, const CMatrix& w, double rho,
                           double noise_variance) {
  if (h.cols() != f.rows() || h.rows() != w.rows() || f.cols() != w.cols()) {
    throw std::invalid_argument("spectral_efficiency: dimension mismatch");
  }
  if (rho < 0.0) {
    throw std::invalid_argument("spectral_efficiency: rho must be >= 0");
  }
  if (!(noise_variance > 0.0)) {
    throw std::invalid_argument("spectral_efficiency: noise variance must be > 0");
  }
  if (rho == 0.0) {
    return 0.0;
  }
  const auto n_s = static_cast<double>(f.cols());
  const CMatrix gram = linalg::hermitian_part(w.adjoint() * w);
  const linalg::PinvResult check = linalg::pinv(gram);
  if (check.rank_deficient) {
    throw NumericalError("spectral_efficiency: combiner W_RF W_BB is rank deficient (rank " +
                         std::to_string(check.rank) + " < " + std::to_string(w.cols()) +
                         "), noise covariance is singular");
  }
  // det(I + c A^{-1} B B^H) = det(A + c B B^H) / det(A)
  const CMatrix b = w.adjoint() * h * f;
  const double c = rho / (n_s * noise_variance);
  const CMatrix num = gram + c * linalg::hermitian_part(b * b.adjoint());
  const double nats = linalg::logdet_hpd(num) - linalg::logdet_hpd(gram);
  return std::max(0.0, nats / std::log(2.0));
}

double spectral_efficiency(const LinkState& link) {
  if (link.precoder.rf.cols() != link.precoder.bb.rows() ||
      link.combiner.rf.cols() != link.combiner.bb.rows()) {
    throw std::invalid_argument("spectral_efficiency: RF/baseband shapes disagree");
  }
  return spectral_efficiency(link.h, link.precoder.product(), link.combiner.product(), link.rho,
                             link.noise_variance);
}

CMatrix fully_digital_precoder(const CMatrix& h, const CMatrix& r, int n_s, double rho,
                               double noise_variance, BenchmarkMode mode) {
  if (n_s < 1 || n_s > std::min(h.rows(), h.cols())) {
    throw std::invalid_argument("fully_digital_benchmark: need N_S <= min(N_T, N_R)");
  }
  if (!(rho > 0.0) || !(noise_variance > 0.0)) {
    throw std::invalid_argument("fully_digital_benchmark: rho and noise variance must be > 0");
  }
  if (mode == BenchmarkMode::kInstantaneous) {
    const Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
    const RVector sv = svd.singularValues().head(n_s);
    const RVector gains = sv.cwiseProduct(sv) / noise_variance;
    const WaterFillingResult wf = water_filling_allocation(gains, rho, n_s);
    return svd.matrixV().leftCols(n_s) * wf.allocations.cwiseSqrt().cast<Complex>().asDiagonal();
  }
  if (r.rows() != h.cols() || r.cols() != h.cols()) {
    throw std::invalid_argument("fully_digital_benchmark: covariance must be N_T x N_T");
  }
  const auto n_t = r.rows();
  return waterfilling_fbb(CMatrix::Identity(n_t, n_t), r, rho / noise_variance, n_s).bb;
}

double fully_digital_benchmark(const CMatrix& h, const CMatrix& r, int n_s, double rho,
                               double noise_variance, BenchmarkMode mode) {
  const CMatrix f = fully_digital_precoder(h, r, n_s, rho, noise_variance, mode);
  const auto n_t = f.rows();
  const CMatrix w = mmse_combiner(h, CMatrix::Identity(n_t, n_t), f, rho, noise_variance);
  try {
    return spectral_efficiency(h, f, w, rho, noise_variance);
  } catch (const NumericalError&) {
    // Streams with no power leave W rank deficient; the optimal-receiver value is still defined.
    const CMatrix hf = h * f;
    const auto k = f.cols();
    const CMatrix a = CMatrix::Identity(k, k) +
                      (rho / (static_cast<double>(k) * noise_variance)) *
                          linalg::hermitian_part(hf.adjoint() * hf);
    return linalg::logdet_hpd(a) / std::log(2.0);
  }
}

double nmse(const CMatrix& estimate, const CMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw std::invalid_argument("nmse: shape mismatch");
  }
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) {
    throw std::invalid_argument("nmse: truth must be nonzero");
  }
  return (estimate - truth).squaredNorm() / denom;
}

double snr_db_to_rho(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

}  // namespace hbf
