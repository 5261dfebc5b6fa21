#include "hbf/combiner.hpp"

#include "hbf/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace hbf {

namespace {

void check_link(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb, double rho,
                double noise_variance, const char* who) {
  if (h.cols() != f_rf.rows() || f_rf.cols() != f_bb.rows()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch between H, F_RF and F_BB");
  }
  if (rho < 0.0 || noise_variance < 0.0) {
    throw std::invalid_argument(std::string(who) + ": rho and noise variance must be >= 0");
  }
}

}  // namespace

CMatrix mmse_combiner(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb, double rho,
                      double noise_variance) {
  check_link(h, f_rf, f_bb, rho, noise_variance, "mmse_combiner");
  if (!(rho > 0.0)) {
    throw std::invalid_argument("mmse_combiner: rho must be > 0");
  }
  const CMatrix heff = h * f_rf * f_bb;
  const auto n_s = heff.cols();
  const CMatrix gram = heff.adjoint() * heff +
                       (static_cast<double>(n_s) * noise_variance / rho) *
                           CMatrix::Identity(n_s, n_s);
  CMatrix wh;
  const Eigen::LLT<CMatrix> llt(gram);
  const double scale = gram.cwiseAbs().maxCoeff();
  bool ok = llt.info() == Eigen::Success && scale > 0.0;
  if (ok) {
    // Reject near-singular factorizations; the pinv path handles them.
    const RVector d = llt.matrixLLT().diagonal().real();
    ok = d.minCoeff() * d.minCoeff() > linalg::kPinvRelTol * scale;
  }
  if (ok) {
    wh = llt.solve(heff.adjoint());
  } else {
    wh = linalg::pinv(gram).pinv * heff.adjoint();
  }
  return (wh / std::sqrt(rho)).adjoint();
}

CMatrix receive_covariance(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb, double rho,
                           double noise_variance) {
  check_link(h, f_rf, f_bb, rho, noise_variance, "receive_covariance");
  const CMatrix hf = h * f_rf * f_bb;
  CMatrix lambda = rho * hf * hf.adjoint();
  lambda.diagonal().array() += noise_variance;
  return linalg::hermitian_part(lambda);
}

ReceiveStatistics receive_statistics(const CMatrix& h, const CMatrix& f_rf, const CMatrix& f_bb,
                                     double rho, double noise_variance) {
  ReceiveStatistics s;
  s.covariance = receive_covariance(h, f_rf, f_bb, rho, noise_variance);
  s.w_mmse = mmse_combiner(h, f_rf, f_bb, rho, noise_variance);
  s.rho = rho;
  s.noise_variance = noise_variance;
  return s;
}

BasebandCombiner wbb_closed_form(const CMatrix& w_rf, const CMatrix& lambda, const CMatrix& w_mmse) {
  if (lambda.rows() != w_rf.rows() || lambda.cols() != w_rf.rows() || w_mmse.rows() != w_rf.rows()) {
    throw std::invalid_argument("wbb_closed_form: dimension mismatch");
  }
  const CMatrix lw = lambda * w_rf;
  const CMatrix gram = linalg::hermitian_part(w_rf.adjoint() * lw);
  const CMatrix rhs = lw.adjoint() * w_mmse;
  BasebandCombiner out;
  const linalg::PinvResult inv = linalg::pinv(gram);
  if (inv.rank_deficient) {
    out.pinv_fallback = true;
    out.bb = inv.pinv * rhs;
    return out;
  }
  const Eigen::LLT<CMatrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    out.pinv_fallback = true;
    out.bb = inv.pinv * rhs;
    return out;
  }
  out.bb = llt.solve(rhs);
  return out;
}

double weighted_combiner_residual(const CMatrix& w_rf, const CMatrix& w_bb, const CMatrix& lambda,
                                  const CMatrix& w_mmse) {
  const CMatrix e = w_mmse - w_rf * w_bb;
  return std::sqrt(std::max(0.0, (e.adjoint() * lambda * e).trace().real()));
}

CombinerSolution alternating_hybrid_combiner(const CMatrix& h, const CMatrix& f_rf,
                                             const CMatrix& f_bb, double rho, double noise_variance,
                                             int n_rf, const CombinerOptions& options) {
  const auto n_r = static_cast<int>(h.rows());
  const auto n_s = static_cast<int>(f_bb.cols());
  if (n_rf < n_s || n_rf > n_r) {
    throw std::invalid_argument("alternating_hybrid_combiner: need N_S <= N_RF <= N_R");
  }
  CombinerSolution out;
  out.stats = receive_statistics(h, f_rf, f_bb, rho, noise_variance);
  const CMatrix& lambda = out.stats.covariance;
  const CMatrix& w_mmse = out.stats.w_mmse;

  CVector x = starting_point(options.initial_rf, n_r, n_rf, options.seed);
  CMatrix w_rf = unvec(x, n_r, n_rf);
  BasebandCombiner bb = wbb_closed_form(w_rf, lambda, w_mmse);
  out.pinv_fallback = bb.pinv_fallback;
  out.weighted_residual_history.push_back(weighted_combiner_residual(w_rf, bb.bb, lambda, w_mmse));
  out.unweighted_residual_history.push_back((w_mmse - w_rf * bb.bb).norm());

  for (int outer = 0; outer < options.max_outer; ++outer) {
    std::optional<CMatrix> weight;
    if (options.weighted_rf_objective) {
      weight = lambda;
    }
    const WeightedFrobeniusCost cost(w_mmse, bb.bb, weight);
    const ManifoldResult inner = solve_circle_cg(cost, x, options.manifold);
    if (inner.armijo_failed) {
      ++out.inner_failures;
    }
    const CMatrix cand_rf = unvec(inner.x, n_r, n_rf);
    const BasebandCombiner cand_bb = wbb_closed_form(cand_rf, lambda, w_mmse);
    const double weighted = weighted_combiner_residual(cand_rf, cand_bb.bb, lambda, w_mmse);
    const double unweighted = (w_mmse - cand_rf * cand_bb.bb).norm();
    out.outer_iterations = outer + 1;

    const double prev_weighted = out.weighted_residual_history.back();
    if (weighted > prev_weighted) {
      // The plain-objective W_RF step can lose ground on the weighted residual; keep the old pair.
      ++out.rejected_updates;
      out.converged = true;
      break;
    }
    const double prev_metric = options.weighted_rf_objective
                                   ? prev_weighted
                                   : out.unweighted_residual_history.back();
    const double metric = options.weighted_rf_objective ? weighted : unweighted;

    x = inner.x;
    w_rf = cand_rf;
    bb = cand_bb;
    out.pinv_fallback = out.pinv_fallback || bb.pinv_fallback;
    out.weighted_residual_history.push_back(weighted);
    out.unweighted_residual_history.push_back(unweighted);
    if (std::abs(prev_metric - metric) < options.outer_tol) {
      out.converged = true;
      break;
    }
  }

  out.beamformer.rf = w_rf;
  out.beamformer.bb = bb.bb;
  out.beamformer.role = BeamformerRole::kCombiner;
  return out;
}

HybridBeamformer phase_extraction_hybrid_combiner(const CMatrix& h, const CMatrix& f_rf,
                                                  const CMatrix& f_bb, double rho,
                                                  double noise_variance, int n_rf) {
  const auto n_s = static_cast<int>(f_bb.cols());
  if (n_rf < n_s || n_rf > h.rows()) {
    throw std::invalid_argument("phase_extraction_hybrid_combiner: need N_S <= N_RF <= N_R");
  }
  const ReceiveStatistics s = receive_statistics(h, f_rf, f_bb, rho, noise_variance);
  HybridBeamformer bf;
  bf.role = BeamformerRole::kCombiner;
  if (n_rf == n_s) {
    bf.rf = linalg::unit_modulus_phase(s.w_mmse);
  } else {
    bf.rf = linalg::unit_modulus_phase(linalg::eig_hermitian_desc(s.covariance).vectors.leftCols(n_rf));
  }
  bf.bb = wbb_closed_form(bf.rf, s.covariance, s.w_mmse).bb;
  return bf;
}

}  // namespace hbf
