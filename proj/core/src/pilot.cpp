#include "hbf/pilot.hpp"

#include "hbf/channel.hpp"
#include "hbf/linalg.hpp"
#include "hbf/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace hbf {

int PilotConfig::channel_uses(int n_rf) const {
  if (n_rf < 1) {
    throw std::invalid_argument("PilotConfig::channel_uses: n_rf must be >= 1");
  }
  return (m_r() + n_rf - 1) / n_rf;
}

void PilotConfig::validate() const {
  if (tx_beams.size() == 0 || rx_beams.size() == 0) {
    throw std::invalid_argument("PilotConfig: empty beam matrix");
  }
  if (pilot_symbols.size() != tx_beams.cols()) {
    throw std::invalid_argument("PilotConfig: pilot symbol count must equal M_T");
  }
  for (Eigen::Index k = 0; k < pilot_symbols.size(); ++k) {
    if (pilot_symbols(k) == Complex(0.0, 0.0)) {
      throw std::invalid_argument("PilotConfig: pilot symbols must be nonzero");
    }
  }
}

CMatrix dft_beam_matrix(int n, int m) {
  if (n < 1 || m < 1 || m > n) {
    throw std::invalid_argument("dft_beam_matrix: requires 1 <= m <= n");
  }
  CMatrix a(n, m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int l = 0; l < m; ++l) {
    for (int k = 0; k < n; ++k) {
      // Reduce k*l mod n first so large arrays keep full phase precision.
      const long kl = (static_cast<long>(k) * l) % n;
      a(k, l) = std::polar(scale, -2.0 * kPi * static_cast<double>(kl) / n);
    }
  }
  return a;
}

PilotConfig make_dft_pilot(int n_t, int n_r, int m_t, int m_r) {
  PilotConfig cfg;
  cfg.tx_beams = dft_beam_matrix(n_t, m_t);
  cfg.rx_beams = dft_beam_matrix(n_r, m_r);
  cfg.pilot_symbols = CVector::Ones(m_t);
  return cfg;
}

namespace {

void check_dims(const CMatrix& h, const PilotConfig& cfg) {
  cfg.validate();
  if (h.rows() != cfg.n_r() || h.cols() != cfg.n_t()) {
    throw std::invalid_argument("preamble: channel is " + std::to_string(h.rows()) + "x" +
                                std::to_string(h.cols()) + " but beams expect " +
                                std::to_string(cfg.n_r()) + "x" + std::to_string(cfg.n_t()));
  }
}

}  // namespace

CMatrix simulate_preamble_with_variance(const CMatrix& h, const PilotConfig& cfg,
                                        double noise_variance, std::uint64_t seed) {
  check_dims(h, cfg);
  if (noise_variance < 0.0) {
    throw std::invalid_argument("simulate_preamble: noise variance must be >= 0");
  }
  const CMatrix transmitted = h * cfg.tx_beams * cfg.pilot_symbols.asDiagonal();
  CMatrix ybar = cfg.rx_beams.adjoint() * transmitted;
  if (noise_variance > 0.0) {
    Stream rng(seed);
    const CMatrix noise =
        complex_gaussian_matrix(rng, transmitted.rows(), transmitted.cols(), noise_variance);
    ybar += cfg.rx_beams.adjoint() * noise;
  }
  return ybar;
}

CMatrix simulate_preamble(const CMatrix& h, const PilotConfig& cfg, double snr_db,
                          std::uint64_t seed) {
  check_dims(h, cfg);
  const CMatrix transmitted = h * cfg.tx_beams * cfg.pilot_symbols.asDiagonal();
  const double power = transmitted.squaredNorm() / static_cast<double>(transmitted.size());
  double variance = 0.0;
  if (!(std::isinf(snr_db) && snr_db > 0)) {
    if (!(power > 0.0)) {
      throw std::invalid_argument("simulate_preamble: zero channel has undefined SNR");
    }
    variance = noise_variance_for_snr(power, snr_db);
  }
  return simulate_preamble_with_variance(h, cfg, variance, seed);
}

IceResult initial_channel_estimate(const CMatrix& ybar, const PilotConfig& cfg) {
  cfg.validate();
  if (ybar.rows() != cfg.m_r() || ybar.cols() != cfg.m_t()) {
    throw std::invalid_argument("initial_channel_estimate: observation must be M_R x M_T");
  }
  IceResult out;
  const CMatrix& w = cfg.rx_beams;
  const CMatrix& f = cfg.tx_beams;

  CMatrix t_rx;  // N_R x M_R
  if (cfg.m_r() < cfg.n_r()) {
    t_rx = w;
  } else {
    const linalg::PinvResult inv = linalg::pinv(w * w.adjoint());
    out.ill_conditioned = out.ill_conditioned || inv.rank_deficient;
    t_rx = inv.pinv * w;
  }

  CMatrix t_tx;  // M_T x N_T
  if (cfg.m_t() < cfg.n_t()) {
    t_tx = f.adjoint();
  } else {
    const linalg::PinvResult inv = linalg::pinv(f * f.adjoint());
    out.ill_conditioned = out.ill_conditioned || inv.rank_deficient;
    t_tx = f.adjoint() * inv.pinv;
  }

  // Undo non-identity pilot symbols; a no-op for S = I.
  const CVector s_inv = cfg.pilot_symbols.cwiseInverse();
  out.y = t_rx * ybar * s_inv.asDiagonal() * t_tx;
  return out;
}

std::vector<double> omp_angle_grid(int grid_size) {
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (int k = 0; k < grid_size; ++k) {
    grid[static_cast<std::size_t>(k)] = -kPi / 2.0 + kPi * k / grid_size;
  }
  return grid;
}

namespace {
constexpr double kOmpRankTol = 1e-6;
}  // namespace

OmpResult reference_estimator_omp(const CMatrix& ybar, const PilotConfig& cfg,
                                  const OmpOptions& options) {
  cfg.validate();
  if (options.sparsity < 1) {
    throw std::invalid_argument("reference_estimator_omp: sparsity must be >= 1");
  }
  if (options.grid_size < std::max(cfg.n_t(), cfg.n_r())) {
    throw std::invalid_argument("reference_estimator_omp: grid_size must be >= max(N_T, N_R)");
  }
  if (ybar.rows() != cfg.m_r() || ybar.cols() != cfg.m_t()) {
    throw std::invalid_argument("reference_estimator_omp: observation must be M_R x M_T");
  }

  const ArrayGeometry tx{cfg.n_t(), options.spacing_ratio};
  const ArrayGeometry rx{cfg.n_r(), options.spacing_ratio};
  const std::vector<double> grid = omp_angle_grid(options.grid_size);
  const int g = options.grid_size;

  CMatrix steer_rx(cfg.n_r(), g);
  CMatrix steer_tx(cfg.n_t(), g);
  for (int k = 0; k < g; ++k) {
    steer_rx.col(k) = steering_vector(grid[static_cast<std::size_t>(k)], rx);
    steer_tx.col(k) = steering_vector(grid[static_cast<std::size_t>(k)], tx);
  }
  // Atom (i, j) observed through the beams is u_i v_j^H.
  const CMatrix u = cfg.rx_beams.adjoint() * steer_rx;  // M_R x G
  const CMatrix v = cfg.pilot_symbols.conjugate().asDiagonal() * (cfg.tx_beams.adjoint() * steer_tx);  // M_T x G
  const RVector u_norm = u.colwise().norm().transpose();
  const RVector v_norm = v.colwise().norm().transpose();

  OmpResult out;
  const double y_energy = ybar.squaredNorm();
  out.residual_history.push_back(std::sqrt(y_energy));
  out.h = CMatrix::Zero(cfg.n_r(), cfg.n_t());
  if (y_energy == 0.0) {
    return out;
  }

  const Eigen::Index m = ybar.size();
  CMatrix phi(m, 0);
  const Eigen::Map<const CVector> y_vec(ybar.data(), m);
  CVector coeffs;
  CMatrix residual = ybar;
  CMatrix best_h = out.h;
  double best_res = out.residual_history.front();

  for (int it = 0; it < options.sparsity; ++it) {
    const CMatrix corr = u.adjoint() * residual * v;  // G x G
    double best = -1.0;
    int bi = 0;
    int bj = 0;
    for (int j = 0; j < g; ++j) {
      for (int i = 0; i < g; ++i) {
        const double denom = u_norm(i) * v_norm(j);
        if (denom <= 0.0) {
          continue;
        }
        const double score = std::abs(corr(i, j)) / denom;
        if (score > best) {
          best = score;
          bi = i;
          bj = j;
        }
      }
    }
    const auto already = std::find(out.support.begin(), out.support.end(), std::make_pair(bi, bj));
    if (already != out.support.end()) {
      out.converged = false;
      break;
    }
    out.support.emplace_back(bi, bj);
    const CMatrix atom = u.col(bi) * v.col(bj).adjoint();
    phi.conservativeResize(m, phi.cols() + 1);
    phi.col(phi.cols() - 1) = Eigen::Map<const CVector>(atom.data(), m);

    // An atom (nearly) inside the span of the support only adds energy in
    // directions the beams do not observe; its coefficients blow up.
    Eigen::ColPivHouseholderQR<CMatrix> qr(phi);
    qr.setThreshold(kOmpRankTol);
    if (qr.rank() < phi.cols()) {
      out.support.pop_back();
      phi.conservativeResize(m, phi.cols() - 1);
      out.converged = false;
      break;
    }
    coeffs = qr.solve(y_vec);
    const CVector fitted = phi * coeffs;
    residual = ybar - Eigen::Map<const CMatrix>(fitted.data(), ybar.rows(), ybar.cols());
    const double res = residual.norm();
    if (!std::isfinite(res)) {
      out.converged = false;
      break;
    }
    out.residual_history.push_back(res);

    CMatrix h = CMatrix::Zero(cfg.n_r(), cfg.n_t());
    for (std::size_t k = 0; k < out.support.size(); ++k) {
      const auto [ri, ti] = out.support[k];
      h.noalias() += coeffs(static_cast<Eigen::Index>(k)) * steer_rx.col(ri) * steer_tx.col(ti).adjoint();
    }
    if (res <= best_res) {
      best_res = res;
      best_h = h;
    } else {
      out.converged = false;
    }
    if (res * res <= options.residual_tol * y_energy) {
      break;
    }
  }
  out.h = best_h;
  return out;
}

OmpReferenceEstimator::OmpReferenceEstimator(PilotConfig cfg, OmpOptions options)
    : cfg_(std::move(cfg)), options_(options) {}

ReferenceEstimate OmpReferenceEstimator::estimate(const PilotObservation& obs) const {
  const OmpResult r = reference_estimator_omp(obs.ybar, cfg_, options_);
  return {r.h, r.h.allFinite()};
}

OracleReferenceEstimator::OracleReferenceEstimator(std::function<CMatrix()> truth)
    : truth_(std::move(truth)) {}

ReferenceEstimate OracleReferenceEstimator::estimate(const PilotObservation&) const {
  return {truth_(), true};
}

}  // namespace hbf
