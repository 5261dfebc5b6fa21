#pragma once

#include "hbf/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hbf {

/// Conjugate-gradient options for optimization on the complex circle
/// manifold {x : |x_m| = 1}.
struct ManifoldOptions {
  int max_iter = 500;
  /// Stop once ||grad|| <= grad_tol_scale * sqrt(dim).
  double grad_tol_scale = 1e-6;
  double armijo_initial_step = 1.0;
  double armijo_contraction = 0.5;
  double armijo_sufficient_decrease = 1e-4;
  int armijo_max_backtracks = 25;
};

/// f(X) = tr((T - X B)^H W (T - X B)), i.e. ||W^{1/2}(T - X B)||_F^2, with
/// X the N x K unit-modulus matrix. W = I when `weight` is empty.
class WeightedFrobeniusCost {
 public:
  WeightedFrobeniusCost(CMatrix target, CMatrix right_factor,
                        std::optional<CMatrix> weight = std::nullopt);

  Eigen::Index rows() const { return target_.rows(); }
  Eigen::Index cols() const { return right_factor_.rows(); }
  Eigen::Index dim() const { return rows() * cols(); }

  /// x = vec(X), column-major.
  double value(const CVector& x) const;
  /// 2 * df/d(conj x): -2 vec(W (T - X B) B^H).
  CVector euclidean_gradient(const CVector& x) const;

 private:
  CMatrix residual(const CVector& x) const;

  CMatrix target_;
  CMatrix right_factor_;
  std::optional<CMatrix> weight_;
};

/// Snapshot handed to the per-iteration observer.
struct ManifoldSolverState {
  const CVector* x = nullptr;
  const CVector* direction = nullptr;
  const CVector* transported_direction = nullptr;
  double step = 0.0;
  double beta = 0.0;
  int iteration = 0;
  const std::vector<double>* cost_history = nullptr;
};

struct ManifoldResult {
  CVector x;
  std::vector<double> cost_history;  // cost at x0 and after each accepted step
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;       // gradient tolerance reached
  bool armijo_failed = false;   // line search exhausted its backtracking budget
  double max_modulus_deviation = 0.0;  // max over iterates of max_m ||x_m| - 1|
};

/// Euclidean gradient for f(x) = ||vec(F_opt) - (F_BB^T (x) I) x||^2:
/// -2 (conj(F_BB) (x) I) [vec(F_opt) - (F_BB^T (x) I) x].
CVector euclidean_gradient_frf(const CVector& x, const CMatrix& f_bb, const CMatrix& f_opt);

/// grad = egrad - Re{egrad .* conj(x)} .* x
CVector riemannian_project(const CVector& x, const CVector& egrad);

/// Elementwise (x + step d) / |x + step d|. Zero entries map to 1.
CVector retract(const CVector& x, const CVector& d, double step);

/// Unit-modulus vector with phases uniform on [0, 2 pi).
CVector random_circle_point(Eigen::Index n, std::uint64_t seed);

using ManifoldObserver = std::function<void(const ManifoldSolverState&)>;

/// Riemannian conjugate gradient (Polak-Ribiere+, Armijo backtracking).
ManifoldResult solve_circle_cg(const WeightedFrobeniusCost& cost, const CVector& x0,
                               const ManifoldOptions& options,
                               const ManifoldObserver& observer = {});

/// Minimizes ||F_opt - F_RF F_BB||_F^2 over unit-modulus F_RF; x0 = vec(F_RF init).
ManifoldResult solve_frf_manifold_cg(const CMatrix& f_opt, const CMatrix& f_bb,
                                     const CVector& x0, const ManifoldOptions& options,
                                     const ManifoldObserver& observer = {});

/// Reshapes a column-major vec back to rows x cols.
CMatrix unvec(const CVector& x, Eigen::Index rows, Eigen::Index cols);
CVector vec(const CMatrix& m);

/// vec(initial) when given (checked for shape and unit modulus), else random_circle_point.
CVector starting_point(const std::optional<CMatrix>& initial, Eigen::Index rows, Eigen::Index cols,
                       std::uint64_t seed);

}  // namespace hbf
