#include "hbf/manifold.hpp"

#include "hbf/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hbf {

CMatrix unvec(const CVector& x, Eigen::Index rows, Eigen::Index cols) {
  if (x.size() != rows * cols) {
    throw std::invalid_argument("unvec: length does not match shape");
  }
  return Eigen::Map<const CMatrix>(x.data(), rows, cols);
}

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

WeightedFrobeniusCost::WeightedFrobeniusCost(CMatrix target, CMatrix right_factor,
                                             std::optional<CMatrix> weight)
    : target_(std::move(target)), right_factor_(std::move(right_factor)), weight_(std::move(weight)) {
  if (right_factor_.cols() != target_.cols()) {
    throw std::invalid_argument("WeightedFrobeniusCost: target and right factor column counts differ");
  }
  if (weight_ && (weight_->rows() != target_.rows() || weight_->cols() != target_.rows())) {
    throw std::invalid_argument("WeightedFrobeniusCost: weight must be square with target's row count");
  }
}

CMatrix WeightedFrobeniusCost::residual(const CVector& x) const {
  return target_ - unvec(x, rows(), cols()) * right_factor_;
}

double WeightedFrobeniusCost::value(const CVector& x) const {
  const CMatrix e = residual(x);
  if (!weight_) {
    return e.squaredNorm();
  }
  return (e.adjoint() * (*weight_) * e).trace().real();
}

CVector WeightedFrobeniusCost::euclidean_gradient(const CVector& x) const {
  CMatrix e = residual(x);
  if (weight_) {
    e = (*weight_) * e;
  }
  const CMatrix g = -2.0 * e * right_factor_.adjoint();
  return vec(g);
}

CVector euclidean_gradient_frf(const CVector& x, const CMatrix& f_bb, const CMatrix& f_opt) {
  if (x.size() != f_opt.rows() * f_bb.rows()) {
    throw std::invalid_argument("euclidean_gradient_frf: x length must be N_T * N_RF");
  }
  return WeightedFrobeniusCost(f_opt, f_bb).euclidean_gradient(x);
}

CVector riemannian_project(const CVector& x, const CVector& egrad) {
  if (x.size() != egrad.size()) {
    throw std::invalid_argument("riemannian_project: size mismatch");
  }
  CVector out(x.size());
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    const double radial = (egrad(m) * std::conj(x(m))).real();
    out(m) = egrad(m) - radial * x(m);
  }
  return out;
}

CVector retract(const CVector& x, const CVector& d, double step) {
  CVector out = x + step * d;
  for (Eigen::Index m = 0; m < out.size(); ++m) {
    const double mag = std::abs(out(m));
    out(m) = mag > 0.0 ? out(m) / mag : Complex(1.0, 0.0);
  }
  return out;
}

CVector random_circle_point(Eigen::Index n, std::uint64_t seed) {
  Stream rng(seed);
  CVector x(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    x(m) = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));
  }
  return x;
}

CVector starting_point(const std::optional<CMatrix>& initial, Eigen::Index rows, Eigen::Index cols,
                       std::uint64_t seed) {
  if (!initial) {
    return random_circle_point(rows * cols, seed);
  }
  if (initial->rows() != rows || initial->cols() != cols) {
    throw std::invalid_argument("starting_point: initial RF matrix has the wrong shape");
  }
  if (((initial->array().abs() - 1.0).abs() > 1e-9).any()) {
    throw std::invalid_argument("starting_point: initial RF matrix is not unit modulus");
  }
  return vec(*initial);
}

namespace {

constexpr double kPowellRestart = 0.2;

double inner(const CVector& a, const CVector& b) { return a.dot(b).real(); }

double modulus_deviation(const CVector& x) {
  double worst = 0.0;
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    worst = std::max(worst, std::abs(std::abs(x(m)) - 1.0));
  }
  return worst;
}

}  // namespace

ManifoldResult solve_circle_cg(const WeightedFrobeniusCost& cost, const CVector& x0,
                               const ManifoldOptions& options, const ManifoldObserver& observer) {
  if (x0.size() != cost.dim()) {
    throw std::invalid_argument("solve_circle_cg: x0 has the wrong length");
  }
  ManifoldResult out;
  out.max_modulus_deviation = modulus_deviation(x0);
  if (out.max_modulus_deviation > 1e-9) {
    throw std::invalid_argument("solve_circle_cg: x0 must be unit modulus");
  }
  const double grad_tol =
      options.grad_tol_scale * std::sqrt(static_cast<double>(std::max<Eigen::Index>(cost.dim(), 1)));

  CVector x = x0;
  double fx = cost.value(x);
  out.cost_history.push_back(fx);
  CVector grad = riemannian_project(x, cost.euclidean_gradient(x));
  CVector dir = -grad;
  CVector transported = CVector::Zero(x.size());
  double beta = 0.0;
  double last_decrease = 0.0;

  int it = 0;
  for (; it < options.max_iter; ++it) {
    out.grad_norm = grad.norm();
    if (out.grad_norm <= grad_tol) {
      out.converged = true;
      break;
    }
    double slope = inner(grad, dir);
    if (slope >= 0.0) {
      // Not a descent direction after the conjugate update: restart.
      dir = -grad;
      slope = -grad.squaredNorm();
    }

    // First trial step from the last decrease (quadratic model); a fixed unit
    // step overshoots to the mirror point near a minimum and Armijo accepts it.
    double step = options.armijo_initial_step;
    if (last_decrease > 0.0) {
      step = std::min(step, 1.01 * 2.0 * last_decrease / -slope);
    }
    bool accepted = false;
    CVector x_new;
    double f_new = fx;
    for (int bt = 0; bt <= options.armijo_max_backtracks; ++bt) {
      x_new = retract(x, dir, step);
      f_new = cost.value(x_new);
      if (f_new <= fx + options.armijo_sufficient_decrease * step * slope) {
        accepted = true;
        break;
      }
      step *= options.armijo_contraction;
    }
    if (!accepted) {
      out.armijo_failed = true;
      break;
    }

    // Vector transport of the previous direction and gradient onto T_{x_new}.
    transported = riemannian_project(x_new, dir);
    const CVector old_grad_transported = riemannian_project(x_new, grad);
    const double old_grad_sq = grad.squaredNorm();

    last_decrease = fx - f_new;
    x = x_new;
    fx = f_new;
    out.cost_history.push_back(fx);
    out.max_modulus_deviation = std::max(out.max_modulus_deviation, modulus_deviation(x));
    grad = riemannian_project(x, cost.euclidean_gradient(x));

    beta = old_grad_sq > 0.0 ? inner(grad, grad - old_grad_transported) / old_grad_sq : 0.0;
    beta = std::max(beta, 0.0);
    // Powell restart: consecutive gradients far from orthogonal mean the
    // step overshot and PR+ would keep amplifying the oscillation.
    if (std::abs(inner(grad, old_grad_transported)) > kPowellRestart * grad.squaredNorm()) {
      beta = 0.0;
    }
    dir = -grad + beta * transported;

    if (observer) {
      ManifoldSolverState state;
      state.x = &x;
      state.direction = &dir;
      state.transported_direction = &transported;
      state.step = step;
      state.beta = beta;
      state.iteration = it + 1;
      state.cost_history = &out.cost_history;
      observer(state);
    }
  }
  out.iterations = it;
  if (!out.converged && !out.armijo_failed) {
    out.grad_norm = grad.norm();
    out.converged = out.grad_norm <= grad_tol;
  }
  out.x = x;
  return out;
}

ManifoldResult solve_frf_manifold_cg(const CMatrix& f_opt, const CMatrix& f_bb, const CVector& x0,
                                     const ManifoldOptions& options,
                                     const ManifoldObserver& observer) {
  if (f_bb.cols() != f_opt.cols()) {
    throw std::invalid_argument("solve_frf_manifold_cg: F_BB and F_opt must have N_S columns");
  }
  return solve_circle_cg(WeightedFrobeniusCost(f_opt, f_bb), x0, options, observer);
}

}  // namespace hbf
