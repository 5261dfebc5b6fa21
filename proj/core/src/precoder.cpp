#include "hbf/precoder.hpp"

#include "hbf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hbf {

double unit_modulus_error(const CMatrix& rf) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < rf.cols(); ++j) {
    for (Eigen::Index i = 0; i < rf.rows(); ++i) {
      worst = std::max(worst, std::abs(std::abs(rf(i, j)) - 1.0));
    }
  }
  return worst;
}

bool satisfies_constraints(const HybridBeamformer& bf, double modulus_tol, double power_tol) {
  if (bf.rf.cols() != bf.bb.rows()) {
    return false;
  }
  if (unit_modulus_error(bf.rf) > modulus_tol) {
    return false;
  }
  if (bf.role == BeamformerRole::kPrecoder) {
    return std::abs(bf.product().squaredNorm() - bf.n_s()) <= power_tol;
  }
  return true;
}

namespace {

void canonical_phase(CMatrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double mag = std::abs(v(i, j));
      // Small slack so ties between equal-magnitude entries resolve to the first index.
      if (mag > best_mag * (1.0 + 1e-12)) {
        best_mag = mag;
        best = i;
      }
    }
    if (best_mag > 0.0) {
      v.col(j) *= std::conj(v(best, j)) / best_mag;
      v(best, j) = Complex(std::abs(v(best, j)), 0.0);
    }
  }
}

void require_hermitian_psd(const CMatrix& r, const char* who) {
  if (r.rows() != r.cols() || r.size() == 0) {
    throw std::invalid_argument(std::string(who) + ": covariance must be square and nonempty");
  }
  const double scale = std::max(r.cwiseAbs().maxCoeff(), 1.0);
  if (!linalg::is_hermitian(r, 1e-10 * scale)) {
    throw std::invalid_argument(std::string(who) + ": covariance is not Hermitian");
  }
  if (!linalg::is_psd(r)) {
    throw std::invalid_argument(std::string(who) + ": covariance is not positive semidefinite");
  }
}

}  // namespace

CMatrix statistical_optimal_beamformer(const CMatrix& r, int n_s) {
  require_hermitian_psd(r, "statistical_optimal_beamformer");
  if (n_s < 1 || n_s > r.rows()) {
    throw std::invalid_argument("statistical_optimal_beamformer: need 1 <= N_S <= N_T");
  }
  const linalg::HermitianEigen eig = linalg::eig_hermitian_desc(r);
  CMatrix f = eig.vectors.leftCols(n_s);
  canonical_phase(f);
  return f;
}

CMatrix phase_extraction_precoder(const CMatrix& f_opt) { return linalg::unit_modulus_phase(f_opt); }

CMatrix least_squares_baseband(const CMatrix& rf, const CMatrix& target) {
  return linalg::pinv(rf).pinv * target;
}

WaterFillingResult water_filling_allocation(const RVector& gains, double rho, int n_s) {
  if (!(rho > 0.0)) {
    throw std::invalid_argument("water_filling_allocation: rho must be > 0");
  }
  if (n_s < 1 || gains.size() != n_s) {
    throw std::invalid_argument("water_filling_allocation: need N_S gains");
  }
  // Floor levels n_s / (rho g); zero gains never receive power.
  std::vector<double> floor(static_cast<std::size_t>(n_s));
  bool any = false;
  for (int n = 0; n < n_s; ++n) {
    const double g = gains(n);
    if (g < 0.0 || !std::isfinite(g)) {
      throw std::invalid_argument("water_filling_allocation: gains must be finite and >= 0");
    }
    floor[static_cast<std::size_t>(n)] =
        g > 0.0 ? n_s / (rho * g) : std::numeric_limits<double>::infinity();
    any = any || g > 0.0;
  }
  if (!any) {
    throw NumericalError("water_filling_allocation: all gains are zero, no signal subspace");
  }
  const double budget = n_s;
  const auto poured = [&](double mu) {
    double s = 0.0;
    for (double f : floor) {
      s += std::max(0.0, mu - f);
    }
    return s;
  };
  double lo = *std::min_element(floor.begin(), floor.end());
  double hi = lo + budget;
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (poured(mid) < budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double mu = 0.5 * (lo + hi);
  // Solve exactly on the active set found by bisection.
  double active_sum = 0.0;
  int active = 0;
  for (double f : floor) {
    if (f < mu) {
      active_sum += f;
      ++active;
    }
  }
  if (active > 0) {
    mu = (budget + active_sum) / active;
  }

  WaterFillingResult out;
  out.mu = mu;
  out.allocations.resize(n_s);
  for (int n = 0; n < n_s; ++n) {
    out.allocations(n) = std::max(0.0, mu - floor[static_cast<std::size_t>(n)]);
  }
  return out;
}

WaterFilledBaseband waterfilling_fbb(const CMatrix& f_rf, const CMatrix& r, double rho, int n_s) {
  if (f_rf.rows() != r.rows() || r.rows() != r.cols()) {
    throw std::invalid_argument("waterfilling_fbb: F_RF rows must match R");
  }
  if (n_s < 1 || n_s > f_rf.cols()) {
    throw std::invalid_argument("waterfilling_fbb: need 1 <= N_S <= N_RF");
  }
  const CMatrix gram = f_rf.adjoint() * f_rf;
  CMatrix gram_inv_sqrt;
  try {
    gram_inv_sqrt = linalg::inv_sqrt_hpd(gram);
  } catch (const NumericalError&) {
    throw NumericalError("waterfilling_fbb: F_RF is rank deficient");
  }
  const CMatrix u_rf = f_rf * gram_inv_sqrt;
  const CMatrix m = linalg::hermitian_part(u_rf.adjoint() * r * u_rf);
  const linalg::HermitianEigen eig = linalg::eig_hermitian_desc(m);

  RVector top = eig.values.head(n_s).cwiseMax(0.0);
  WaterFilledBaseband out;
  out.wf = water_filling_allocation(top.cwiseProduct(top), rho, n_s);
  out.wf.eigenvalues = eig.values.head(n_s);
  CMatrix u_m = eig.vectors.leftCols(n_s);
  canonical_phase(u_m);
  out.wf.eigenvectors = u_m;
  out.bb = gram_inv_sqrt * u_m * out.wf.allocations.cwiseSqrt().cast<Complex>().asDiagonal();
  return out;
}

double PrecoderSolution::relative_residual() const {
  const double denom = f_opt.norm();
  return residual_history.empty() || denom == 0.0 ? 0.0 : residual_history.back() / denom;
}

PrecoderSolution alternating_hybrid_precoder(const CMatrix& r, int n_rf, int n_s, double rho,
                                             const AlternatingOptions& options) {
  const auto n_t = static_cast<int>(r.rows());
  if (n_s < 1 || n_rf < n_s || n_rf > n_t) {
    throw std::invalid_argument("alternating_hybrid_precoder: need N_S <= N_RF <= N_T");
  }
  PrecoderSolution out;
  out.f_opt = statistical_optimal_beamformer(r, n_s);

  CVector x = starting_point(options.initial_rf, n_t, n_rf, options.seed);
  CMatrix f_rf = unvec(x, n_t, n_rf);
  CMatrix f_bb = least_squares_baseband(f_rf, out.f_opt);
  out.residual_history.push_back((out.f_opt - f_rf * f_bb).norm());

  for (int outer = 0; outer < options.max_outer; ++outer) {
    const ManifoldResult inner = solve_frf_manifold_cg(out.f_opt, f_bb, x, options.manifold);
    if (inner.armijo_failed) {
      ++out.inner_failures;
    }
    x = inner.x;
    f_rf = unvec(x, n_t, n_rf);
    f_bb = least_squares_baseband(f_rf, out.f_opt);
    const double res = (out.f_opt - f_rf * f_bb).norm();
    const double prev = out.residual_history.back();
    out.residual_history.push_back(res);
    out.outer_iterations = outer + 1;
    if (std::abs(prev - res) < options.outer_tol) {
      out.converged = true;
      break;
    }
  }

  out.beamformer.rf = f_rf;
  out.beamformer.role = BeamformerRole::kPrecoder;
  WaterFilledBaseband wf = waterfilling_fbb(f_rf, r, rho, n_s);
  out.beamformer.bb = std::move(wf.bb);
  out.wf = std::move(wf.wf);
  return out;
}

CMatrix phase_extraction_rf(const CMatrix& r, int n_rf) {
  return phase_extraction_precoder(statistical_optimal_beamformer(r, n_rf));
}

HybridBeamformer phase_extraction_hybrid_precoder(const CMatrix& r, int n_rf, int n_s, double rho) {
  if (n_s < 1 || n_rf < n_s || n_rf > r.rows()) {
    throw std::invalid_argument("phase_extraction_hybrid_precoder: need N_S <= N_RF <= N_T");
  }
  HybridBeamformer bf;
  bf.role = BeamformerRole::kPrecoder;
  bf.rf = phase_extraction_rf(r, n_rf);
  bf.bb = waterfilling_fbb(bf.rf, r, rho, n_s).bb;
  return bf;
}

double mutual_information(const CMatrix& r, const CMatrix& f_rf, const CMatrix& f_bb, double rho) {
  require_hermitian_psd(r, "mutual_information");
  if (f_rf.rows() != r.rows() || f_rf.cols() != f_bb.rows()) {
    throw std::invalid_argument("mutual_information: dimension mismatch");
  }
  if (rho < 0.0) {
    throw std::invalid_argument("mutual_information: rho must be >= 0");
  }
  const CMatrix f = f_rf * f_bb;
  const auto n_s = f.cols();
  const CMatrix a = CMatrix::Identity(n_s, n_s) +
                    (rho / static_cast<double>(n_s)) * linalg::hermitian_part(f.adjoint() * r * f);
  return linalg::logdet_hpd(a) / std::log(2.0);
}

}  // namespace hbf
