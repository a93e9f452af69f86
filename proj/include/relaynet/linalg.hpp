#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relaynet/error.hpp"

namespace relaynet {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace linalg {

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
struct HermitianEVD {
  RVector eigenvalues;
  CMatrix eigenvectors;
};

/// Throws Error(InvalidArgument) when any entry is NaN or infinite.
void require_finite(const CMatrix& a, const char* what);

CMatrix identity(Eigen::Index n);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Column-major stacking into a (rows*cols) x 1 column.
CMatrix vec(const CMatrix& a);
CMatrix unvec(const CMatrix& column, Eigen::Index rows, Eigen::Index cols);

CMatrix block_diag(std::span<const CMatrix> blocks);

/// Returns a copy made exactly Hermitian, (a + a^H) / 2.
CMatrix hermitian_part(const CMatrix& a);

/// Relative Frobenius distance of `a` from its Hermitian part.
double hermitian_defect(const CMatrix& a);

HermitianEVD hermitian_evd(const CMatrix& a);

/// PSD square root via EVD; tiny negative eigenvalues are clipped to zero.
CMatrix psd_sqrt(const CMatrix& a);

/// Solves a X = rhs for Hermitian positive definite `a` by Cholesky.
CMatrix solve_hpd(const CMatrix& a, const CMatrix& rhs);

/// Inverse of an HPD matrix, through solve_hpd.
CMatrix inverse_hpd(const CMatrix& a);

/// EVD-based pseudo-solve for Hermitian PSD `a`: eigenvalues below
/// 1e-10 * lambda_max are treated as zero.
CMatrix pinv_solve_psd(const CMatrix& a, const CMatrix& rhs);

/// Thin SVD obtained from the EVD of a^H a. Singular values descending;
/// only the first min(rows, cols) right vectors are returned.
struct ThinSVD {
  RVector singular_values;
  CMatrix right_vectors;
};
ThinSVD thin_svd_via_evd(const CMatrix& a);

inline double trace_real(const CMatrix& a) { return a.trace().real(); }

}  // namespace linalg
}  // namespace relaynet
