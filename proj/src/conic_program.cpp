#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "relaynet/conic.hpp"

namespace relaynet::conic {

double AffineScalar::evaluate(const RVector& x) const {
  double v = constant;
  for (const auto& t : terms) v += t.coef * x(t.var);
  return v;
}

RMatrix SymAffineMatrix::evaluate(const RVector& x) const {
  RMatrix m = constant;
  for (const auto& [var, entries] : terms)
    for (const auto& e : entries) m(e.row, e.col) += x(var) * e.value;
  return m;
}

HermitianAffineMatrix::HermitianAffineMatrix(int dim) : dim_(dim), constant_(CMatrix::Zero(dim, dim)) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "Hermitian LMI dimension must be >= 1");
}

void HermitianAffineMatrix::add_term(int var, const CMatrix& coeff) {
  if (coeff.rows() != dim_ || coeff.cols() != dim_)
    throw Error(ErrorCode::DimensionMismatch, "LMI coefficient size differs from block size");
  if (var < 0) throw Error(ErrorCode::InvalidArgument, "negative variable index");
  if (static_cast<std::size_t>(var) >= slot_.size()) slot_.resize(var + 1, -1);
  if (slot_[var] < 0) {
    slot_[var] = static_cast<int>(terms_.size());
    terms_.emplace_back(var, coeff);
  } else {
    terms_[slot_[var]].second += coeff;
  }
}

void HermitianAffineMatrix::add_block_pair(int var, Eigen::Index r, Eigen::Index c, const CMatrix& coeff) {
  CMatrix full = CMatrix::Zero(dim_, dim_);
  full.block(r, c, coeff.rows(), coeff.cols()) += coeff;
  full.block(c, r, coeff.cols(), coeff.rows()) += coeff.adjoint();
  add_term(var, full);
}

CMatrix HermitianAffineMatrix::evaluate(const RVector& x) const {
  CMatrix m = constant_;
  for (const auto& [var, coeff] : terms_) m += x(var) * coeff;
  return m;
}

namespace {

void require_hermitian(const CMatrix& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(ErrorCode::NotHermitian, std::string("LMI ") + what + " is not Hermitian");
}

}  // namespace

RMatrix embed_hermitian(const CMatrix& h) {
  require_hermitian(h, "matrix");
  const Eigen::Index n = h.rows();
  RMatrix out(2 * n, 2 * n);
  const RMatrix re = 0.5 * (h.real() + h.real().transpose());
  const RMatrix im = 0.5 * (h.imag() - h.imag().transpose());
  out << re, -im, im, re;
  return out;
}

SymAffineMatrix embed_hermitian(const HermitianAffineMatrix& lmi) {
  SymAffineMatrix out;
  const int n = lmi.dim();
  out.dim = 2 * n;
  out.constant = embed_hermitian(lmi.constant());
  for (const auto& [var, coeff] : lmi.terms()) {
    require_hermitian(coeff, "coefficient");
    const RMatrix e = embed_hermitian(coeff);
    std::vector<SymEntry> entries;
    for (int j = 0; j < out.dim; ++j)
      for (int i = 0; i < out.dim; ++i)
        if (e(i, j) != 0.0) entries.push_back({i, j, e(i, j)});
    if (!entries.empty()) out.terms.emplace_back(var, std::move(entries));
  }
  return out;
}

int ConicProgram::add_variable() {
  const int v = var_count++;
  objective.conservativeResize(var_count);
  objective(v) = 0.0;
  return v;
}

int ConicProgram::add_variables(int count) {
  const int first = var_count;
  for (int i = 0; i < count; ++i) add_variable();
  return first;
}

void ConicProgram::set_objective(int var, double coef) {
  if (var < 0 || var >= var_count) throw Error(ErrorCode::InvalidArgument, "objective references undeclared variable");
  objective(var) = coef;
}

void ConicProgram::validate() const {
  if (var_count < 1) throw Error(ErrorCode::InvalidArgument, "program has no variables");
  if (objective.size() != var_count) throw Error(ErrorCode::DimensionMismatch, "objective length differs from var_count");
  if (!objective.allFinite()) throw Error(ErrorCode::InvalidArgument, "objective has non-finite entries");
  auto check_scalar = [&](const AffineScalar& a) {
    if (!std::isfinite(a.constant)) throw Error(ErrorCode::InvalidArgument, "non-finite constant");
    for (const auto& t : a.terms) {
      if (t.var < 0 || t.var >= var_count)
        throw Error(ErrorCode::InvalidArgument, "affine expression references undeclared variable");
      if (!std::isfinite(t.coef)) throw Error(ErrorCode::InvalidArgument, "non-finite coefficient");
    }
  };
  for (const auto& a : nonneg) check_scalar(a);
  for (const auto& a : equalities) check_scalar(a);
  for (const auto& s : socs) {
    check_scalar(s.t);
    for (const auto& a : s.v) check_scalar(a);
  }
  for (const auto& b : psd_blocks) {
    if (b.dim < 1) throw Error(ErrorCode::InvalidArgument, "PSD block dimension must be >= 1");
    if (b.constant.rows() != b.dim || b.constant.cols() != b.dim)
      throw Error(ErrorCode::DimensionMismatch, "PSD block constant has wrong size");
    if (!b.constant.allFinite()) throw Error(ErrorCode::InvalidArgument, "PSD block constant non-finite");
    for (const auto& [var, entries] : b.terms) {
      if (var < 0 || var >= var_count)
        throw Error(ErrorCode::InvalidArgument, "PSD block references undeclared variable");
      for (const auto& e : entries) {
        if (e.row < 0 || e.row >= b.dim || e.col < 0 || e.col >= b.dim)
          throw Error(ErrorCode::InvalidArgument, "PSD coefficient entry out of range");
        if (!std::isfinite(e.value)) throw Error(ErrorCode::InvalidArgument, "non-finite PSD coefficient");
      }
    }
  }
}

namespace {

void dump_scalar(const AffineScalar& a, std::ostream& os) {
  os << a.constant << " " << a.terms.size();
  for (const auto& t : a.terms) os << " " << t.var << ":" << t.coef;
  os << "\n";
}

}  // namespace

void dump_program(const ConicProgram& p, std::ostream& os) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  os << "# relaynet conic program, standard form\n";
  os << "# minimize c.x subject to: nonneg rows >= 0, eq rows == 0, ||v|| <= t, PSD blocks >= 0\n";
  os << "# affine row: <constant> <nterms> var:coef ...\n";
  os << "variables " << p.var_count << "\n";
  os << "objective";
  for (int i = 0; i < p.var_count; ++i)
    if (p.objective(i) != 0.0) os << " " << i << ":" << p.objective(i);
  os << "\n";
  os << "nonneg " << p.nonneg.size() << "\n";
  for (const auto& a : p.nonneg) dump_scalar(a, os);
  os << "equalities " << p.equalities.size() << "\n";
  for (const auto& a : p.equalities) dump_scalar(a, os);
  os << "soc " << p.socs.size() << "\n";
  for (const auto& s : p.socs) {
    os << "cone " << (s.v.size() + 1) << "\n";
    dump_scalar(s.t, os);
    for (const auto& a : s.v) dump_scalar(a, os);
  }
  os << "psd " << p.psd_blocks.size() << "\n";
  for (const auto& b : p.psd_blocks) {
    os << "block " << b.dim << "\n";
    os << "constant";
    for (int j = 0; j < b.dim; ++j)
      for (int i = 0; i <= j; ++i)
        if (b.constant(i, j) != 0.0) os << " " << i << "," << j << ":" << b.constant(i, j);
    os << "\n";
    for (const auto& [var, entries] : b.terms) {
      os << "var " << var;
      for (const auto& e : entries)
        if (e.row <= e.col) os << " " << e.row << "," << e.col << ":" << e.value;
      os << "\n";
    }
  }
  os.flags(flags);
  os.precision(prec);
}

double max_violation(const ConicProgram& p, const RVector& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& a : p.nonneg) worst = std::max(worst, -a.evaluate(x));
  for (const auto& a : p.equalities) worst = std::max(worst, std::abs(a.evaluate(x)));
  for (const auto& s : p.socs) {
    double sq = 0.0;
    for (const auto& a : s.v) {
      const double v = a.evaluate(x);
      sq += v * v;
    }
    worst = std::max(worst, std::sqrt(sq) - s.t.evaluate(x));
  }
  for (const auto& b : p.psd_blocks) {
    const RMatrix m = b.evaluate(x);
    Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    worst = std::max(worst, -es.eigenvalues()(0));
  }
  return worst;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

}  // namespace relaynet::conic
