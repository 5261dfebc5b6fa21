#pragma once

#include "hbf/types.hpp"

namespace hbf::linalg {

/// Relative singular-value cutoff used by every pseudo-inverse in the library.
inline constexpr double kPinvRelTol = 1e-10;

struct HermitianEigen {
  RVector values;   // descending
  CMatrix vectors;  // columns match `values`
};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Only the lower triangle is read.
HermitianEigen eig_hermitian_desc(const CMatrix& a);

/// (A + A^H) / 2
CMatrix hermitian_part(const CMatrix& a);

struct PinvResult {
  CMatrix pinv;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

/// Moore-Penrose pseudo-inverse; singular values below rel_tol * sigma_max
/// are treated as zero.
PinvResult pinv(const CMatrix& a, double rel_tol = kPinvRelTol);

/// A^{1/2} and A^{-1/2} for Hermitian PSD A. The inverse root throws
/// NumericalError when A is singular relative to rel_tol.
CMatrix sqrt_psd(const CMatrix& a);
CMatrix inv_sqrt_hpd(const CMatrix& a, double rel_tol = kPinvRelTol);

/// log(det(A)) for Hermitian positive definite A via Cholesky. Throws
/// NumericalError when A is not positive definite.
double logdet_hpd(const CMatrix& a);

bool is_hermitian(const CMatrix& a, double tol);

/// True when every eigenvalue is >= -rel_tol * max(|lambda_max|, tiny).
bool is_psd(const CMatrix& a, double rel_tol = 1e-10);

/// Sum of squared moduli, i.e. ||A||_F^2.
inline double frob2(const CMatrix& a) { return a.squaredNorm(); }

/// Elementwise exp(j * arg(a)); zero entries map to phase 0.
CMatrix unit_modulus_phase(const CMatrix& a);

}  // namespace hbf::linalg
