#include "hbf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace hbf::linalg {

HermitianEigen eig_hermitian_desc(const CMatrix& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("eig_hermitian_desc: matrix must be square");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig_hermitian_desc: eigen solver did not converge");
  }
  const Eigen::Index n = a.rows();
  HermitianEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

PinvResult pinv(const CMatrix& a, double rel_tol) {
  PinvResult out;
  if (a.size() == 0) {
    out.pinv = CMatrix::Zero(a.cols(), a.rows());
    return out;
  }
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  RVector inv = RVector::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff && s(k) > 0.0) {
      inv(k) = 1.0 / s(k);
      ++out.rank;
    }
  }
  out.rank_deficient = out.rank < std::min(a.rows(), a.cols());
  out.pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
  return out;
}

CMatrix sqrt_psd(const CMatrix& a) {
  const HermitianEigen e = eig_hermitian_desc(hermitian_part(a));
  RVector root = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * root.asDiagonal() * e.vectors.adjoint();
}

CMatrix inv_sqrt_hpd(const CMatrix& a, double rel_tol) {
  const HermitianEigen e = eig_hermitian_desc(hermitian_part(a));
  const double top = e.values.size() > 0 ? e.values(0) : 0.0;
  if (e.values.size() == 0 || top <= 0.0 || e.values(e.values.size() - 1) <= rel_tol * top) {
    throw NumericalError("inv_sqrt_hpd: matrix is singular or not positive definite");
  }
  RVector root = e.values.cwiseSqrt().cwiseInverse();
  return e.vectors * root.asDiagonal() * e.vectors.adjoint();
}

double logdet_hpd(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(hermitian_part(a));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("logdet_hpd: matrix is not positive definite");
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    sum += std::log(llt.matrixLLT()(k, k).real());
  }
  return 2.0 * sum;
}

bool is_hermitian(const CMatrix& a, double tol) {
  if (a.rows() != a.cols()) {
    return false;
  }
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_psd(const CMatrix& a, double rel_tol) {
  const HermitianEigen e = eig_hermitian_desc(hermitian_part(a));
  if (e.values.size() == 0) {
    return true;
  }
  const double scale = std::max(std::abs(e.values(0)), std::numeric_limits<double>::min());
  return e.values(e.values.size() - 1) >= -rel_tol * scale;
}

CMatrix unit_modulus_phase(const CMatrix& a) {
  CMatrix out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Complex z = a(i, j);
      out(i, j) = (z == Complex(0.0, 0.0)) ? Complex(1.0, 0.0) : std::polar(1.0, std::arg(z));
    }
  }
  return out;
}

}  // namespace hbf::linalg
