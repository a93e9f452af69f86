#include "relaynet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace relaynet {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::NotSquare: return "matrix not square";
    case ErrorCode::NotHermitian: return "matrix not Hermitian";
    case ErrorCode::NotPsd: return "matrix not positive semidefinite";
    case ErrorCode::NotHpd: return "matrix not positive definite";
    case ErrorCode::NoConvergence: return "no convergence";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::SolverFailure: return "solver failure";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "I/O error";
  }
  return "error";
}

namespace linalg {

namespace {

void require_square(const CMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << " is " << a.rows() << "x" << a.cols();
    throw Error(ErrorCode::NotSquare, os.str());
  }
}

}  // namespace

void require_finite(const CMatrix& a, const char* what) {
  if (!a.allFinite()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " has non-finite entries");
}

CMatrix identity(Eigen::Index n) { return CMatrix::Identity(n, n); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix vec(const CMatrix& a) {
  CMatrix out(a.size(), 1);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(k++, 0) = a(i, j);
  return out;
}

CMatrix unvec(const CMatrix& column, Eigen::Index rows, Eigen::Index cols) {
  if (column.cols() != 1 || column.rows() != rows * cols)
    throw Error(ErrorCode::DimensionMismatch, "unvec: column length does not match rows*cols");
  CMatrix out(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = column(k++, 0);
  return out;
}

CMatrix block_diag(std::span<const CMatrix> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::InvalidArgument, "block_diag of an empty list");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  CMatrix out = CMatrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

CMatrix hermitian_part(const CMatrix& a) {
  require_square(a, "hermitian_part input");
  CMatrix h = 0.5 * (a + a.adjoint());
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) = h(i, i).real();
  return h;
}

double hermitian_defect(const CMatrix& a) {
  require_square(a, "hermitian_defect input");
  const double scale = std::max(1.0, a.norm());
  return (a - a.adjoint()).norm() / scale;
}

HermitianEVD hermitian_evd(const CMatrix& a) {
  require_square(a, "hermitian_evd input");
  require_finite(a, "hermitian_evd input");
  if (hermitian_defect(a) > 1e-10)
    throw Error(ErrorCode::NotHermitian, "hermitian_evd input deviates from Hermitian beyond 1e-10");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "self-adjoint eigensolver failed for n=" << a.rows()
       << " (Eigen info code " << static_cast<int>(es.info()) << ", iteration cap "
       << Eigen::SelfAdjointEigenSolver<CMatrix>::m_maxIterations << " sweeps per eigenvalue)";
    throw Error(ErrorCode::NoConvergence, os.str());
  }
  const Eigen::Index n = a.rows();
  HermitianEVD out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(n - 1 - i);
    out.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

CMatrix psd_sqrt(const CMatrix& a) {
  const HermitianEVD evd = hermitian_evd(a);
  const double scale = evd.eigenvalues.cwiseAbs().maxCoeff();
  RVector roots(evd.eigenvalues.size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const double lam = evd.eigenvalues(i);
    if (lam < -1e-8 * scale) {
      std::ostringstream os;
      os << "eigenvalue " << lam << " below -1e-8 * " << scale;
      throw Error(ErrorCode::NotPsd, os.str());
    }
    roots(i) = std::sqrt(std::max(lam, 0.0));
  }
  const CMatrix& u = evd.eigenvectors;
  return hermitian_part(u * roots.asDiagonal() * u.adjoint());
}

CMatrix solve_hpd(const CMatrix& a, const CMatrix& rhs) {
  require_square(a, "solve_hpd matrix");
  if (rhs.rows() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "solve_hpd: rhs rows differ from matrix size");
  const Eigen::Index n = a.rows();
  if (n == 0) return CMatrix(0, rhs.cols());
  const double trace = a.trace().real();
  Eigen::LLT<CMatrix> llt(hermitian_part(a));
  const double pivot_floor = 1e-12 * trace / static_cast<double>(n);
  bool ok = llt.info() == Eigen::Success && trace > 0.0;
  if (ok) {
    const auto diag = llt.matrixLLT().diagonal().real();
    ok = (diag.array().square() > pivot_floor).all();
  }
  if (!ok) throw Error(ErrorCode::NotHpd, "Cholesky pivot at or below 1e-12 * trace/n");
  return llt.solve(rhs);
}

CMatrix inverse_hpd(const CMatrix& a) { return solve_hpd(a, CMatrix::Identity(a.rows(), a.rows())); }

CMatrix pinv_solve_psd(const CMatrix& a, const CMatrix& rhs) {
  const HermitianEVD evd = hermitian_evd(a);
  const double lam_max = std::max(evd.eigenvalues.size() ? evd.eigenvalues(0) : 0.0, 0.0);
  const double floor = 1e-10 * lam_max;
  RVector inv(evd.eigenvalues.size());
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    const double lam = evd.eigenvalues(i);
    inv(i) = (lam > floor && lam > 0.0) ? 1.0 / lam : 0.0;
  }
  const CMatrix& u = evd.eigenvectors;
  return u * inv.asDiagonal() * (u.adjoint() * rhs);
}

ThinSVD thin_svd_via_evd(const CMatrix& a) {
  const HermitianEVD evd = hermitian_evd(hermitian_part(a.adjoint() * a));
  const Eigen::Index r = std::min(a.rows(), a.cols());
  ThinSVD out;
  out.singular_values = evd.eigenvalues.head(r).cwiseMax(0.0).cwiseSqrt();
  out.right_vectors = evd.eigenvectors.leftCols(r);
  return out;
}

}  // namespace linalg
}  // namespace relaynet
