#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "relaynet/conic.hpp"

// Homogeneous self-dual embedding, Nesterov-Todd scaling, Mehrotra
// predictor-corrector. Standard form:
//   minimize c'x  s.t.  G x + s = h,  A x = b,  s in K
//   maximize -h'z - b'y  s.t.  G'z + A'y + c = 0,  z in K
// with K = R+^l x Q^{q_1} x ... x S^{s_1} x ...
namespace relaynet::conic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PsdData {
  int dim = 0;
  RMatrix h;
  std::vector<int> vars;
  std::vector<std::vector<SymEntry>> coeffs;  // G_j = -coeffs[j]
};

struct StandardForm {
  int n = 0;
  RVector c;
  RMatrix a;
  RVector b;
  RMatrix gl;
  RVector hl;
  std::vector<RMatrix> gq;
  std::vector<RVector> hq;
  std::vector<PsdData> ps;
  int degree = 0;
};

struct ConeVec {
  RVector l;
  std::vector<RVector> q;
  std::vector<RMatrix> s;
};

double dot(const ConeVec& u, const ConeVec& v) {
  double d = u.l.dot(v.l);
  for (std::size_t i = 0; i < u.q.size(); ++i) d += u.q[i].dot(v.q[i]);
  for (std::size_t i = 0; i < u.s.size(); ++i) d += (u.s[i].array() * v.s[i].array()).sum();
  return d;
}

double norm(const ConeVec& u) { return std::sqrt(std::max(dot(u, u), 0.0)); }

void axpy(double alpha, const ConeVec& x, ConeVec& y) {
  y.l += alpha * x.l;
  for (std::size_t i = 0; i < x.q.size(); ++i) y.q[i] += alpha * x.q[i];
  for (std::size_t i = 0; i < x.s.size(); ++i) y.s[i] += alpha * x.s[i];
}

ConeVec scaled(double alpha, const ConeVec& x) {
  ConeVec y = x;
  y.l *= alpha;
  for (auto& v : y.q) v *= alpha;
  for (auto& m : y.s) m *= alpha;
  return y;
}

ConeVec identity_like(const StandardForm& f) {
  ConeVec e;
  e.l = RVector::Ones(f.gl.rows());
  for (const auto& g : f.gq) {
    RVector v = RVector::Zero(g.rows());
    v(0) = 1.0;
    e.q.push_back(v);
  }
  for (const auto& p : f.ps) e.s.push_back(RMatrix::Identity(p.dim, p.dim));
  return e;
}

StandardForm to_standard(const ConicProgram& prog) {
  StandardForm f;
  f.n = prog.var_count;
  f.c = prog.objective;
  const int p = static_cast<int>(prog.equalities.size());
  f.a = RMatrix::Zero(p, f.n);
  f.b = RVector::Zero(p);
  for (int i = 0; i < p; ++i) {
    for (const auto& t : prog.equalities[i].terms) f.a(i, t.var) += t.coef;
    f.b(i) = -prog.equalities[i].constant;
  }
  const int ml = static_cast<int>(prog.nonneg.size());
  f.gl = RMatrix::Zero(ml, f.n);
  f.hl = RVector::Zero(ml);
  for (int i = 0; i < ml; ++i) {
    for (const auto& t : prog.nonneg[i].terms) f.gl(i, t.var) -= t.coef;
    f.hl(i) = prog.nonneg[i].constant;
  }
  for (const auto& soc : prog.socs) {
    const int m = static_cast<int>(soc.v.size()) + 1;
    RMatrix g = RMatrix::Zero(m, f.n);
    RVector h(m);
    auto put = [&](int row, const AffineScalar& a) {
      for (const auto& t : a.terms) g(row, t.var) -= t.coef;
      h(row) = a.constant;
    };
    put(0, soc.t);
    for (int i = 1; i < m; ++i) put(i, soc.v[i - 1]);
    f.gq.push_back(std::move(g));
    f.hq.push_back(std::move(h));
  }
  for (const auto& blk : prog.psd_blocks) {
    PsdData d;
    d.dim = blk.dim;
    d.h = 0.5 * (blk.constant + blk.constant.transpose());
    std::vector<int> slot(f.n, -1);
    for (const auto& [var, entries] : blk.terms) {
      if (slot[var] < 0) {
        slot[var] = static_cast<int>(d.vars.size());
        d.vars.push_back(var);
        d.coeffs.emplace_back();
      }
      auto& dst = d.coeffs[slot[var]];
      dst.insert(dst.end(), entries.begin(), entries.end());
    }
    f.ps.push_back(std::move(d));
  }
  f.degree = ml + static_cast<int>(f.gq.size());
  for (const auto& d : f.ps) f.degree += d.dim;
  return f;
}

ConeVec apply_g(const StandardForm& f, const RVector& x) {
  ConeVec out;
  out.l = f.gl * x;
  for (const auto& g : f.gq) out.q.push_back(g * x);
  for (const auto& d : f.ps) {
    RMatrix m = RMatrix::Zero(d.dim, d.dim);
    for (std::size_t j = 0; j < d.vars.size(); ++j) {
      const double xv = x(d.vars[j]);
      if (xv == 0.0) continue;
      for (const auto& e : d.coeffs[j]) m(e.row, e.col) -= xv * e.value;
    }
    out.s.push_back(std::move(m));
  }
  return out;
}

RVector apply_gt(const StandardForm& f, const ConeVec& z) {
  RVector out = f.gl.transpose() * z.l;
  for (std::size_t i = 0; i < f.gq.size(); ++i) out += f.gq[i].transpose() * z.q[i];
  for (std::size_t k = 0; k < f.ps.size(); ++k) {
    const auto& d = f.ps[k];
    for (std::size_t j = 0; j < d.vars.size(); ++j) {
      double acc = 0.0;
      for (const auto& e : d.coeffs[j]) acc += e.value * z.s[k](e.row, e.col);
      out(d.vars[j]) -= acc;
    }
  }
  return out;
}

ConeVec h_vec(const StandardForm& f) {
  ConeVec h;
  h.l = f.hl;
  h.q = f.hq;
  for (const auto& d : f.ps) h.s.push_back(d.h);
  return h;
}

// Nesterov-Todd scaling W: W z = W^{-T} s = lambda.
struct Scaling {
  RVector d;
  std::vector<RMatrix> wq, wqinv;
  std::vector<double> beta;
  std::vector<RMatrix> r, rinv;
  ConeVec lambda;
};

RMatrix soc_j(int m) {
  RMatrix j = -RMatrix::Identity(m, m);
  j(0, 0) = 1.0;
  return j;
}

// u'Ju in the product form (u0 - |u1|)(u0 + |u1|).
double jnorm2(const RVector& u) {
  const double t = u.tail(u.size() - 1).norm();
  return (u(0) - t) * (u(0) + t);
}

// NT scaling of one SOC from s, z and the invariants s'Js, z'Jz, z's, which
// the caller may compute in a better-conditioned scaled space.
bool soc_scaling(const RVector& s, const RVector& z, double sjs, double zjz, double zs, RMatrix& w, RMatrix& winv,
                 double& beta) {
  if (!(sjs > 0.0) || !(zjz > 0.0) || s(0) <= 0.0 || z(0) <= 0.0) return false;
  const double ns = std::sqrt(sjs);
  const double nz = std::sqrt(zjz);
  const RVector sbar = s / ns;
  const RVector zbar = z / nz;
  const double gamma = std::sqrt(0.5 * (1.0 + zs / (ns * nz)));
  const int m = static_cast<int>(s.size());
  const RMatrix j = soc_j(m);
  const RVector wbar = (sbar + j * zbar) / (2.0 * gamma);
  RVector v = wbar;
  v(0) += 1.0;
  v /= std::sqrt(2.0 * (wbar(0) + 1.0));
  beta = std::sqrt(ns / nz);
  w = beta * (2.0 * v * v.transpose() - j);
  const RVector jv = j * v;
  winv = (2.0 * jv * jv.transpose() - j) / beta;
  return true;
}

bool soc_scaling(const RVector& s, const RVector& z, RMatrix& w, RMatrix& winv, double& beta) {
  return soc_scaling(s, z, jnorm2(s), jnorm2(z), z.dot(s), w, winv, beta);
}

// NT scaling for one PSD block from (S, Z). Returns false when either factor
// is not positive definite.
bool psd_scaling(const RMatrix& s, const RMatrix& z, RMatrix& r, RMatrix& rinv, RVector& lam) {
  Eigen::LLT<RMatrix> ls(s), lz(z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  const RMatrix lsm = ls.matrixL();
  const RMatrix lzm = lz.matrixL();
  Eigen::JacobiSVD<RMatrix> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  lam = svd.singularValues();
  if (!(lam.minCoeff() > 0.0) || !lam.allFinite()) return false;
  const RVector isq = lam.cwiseSqrt().cwiseInverse();
  r = lsm * svd.matrixV() * isq.asDiagonal();
  rinv = isq.asDiagonal() * svd.matrixU().transpose() * lzm.transpose();
  return true;
}

bool compute_scaling(const StandardForm& f, const ConeVec& s, const ConeVec& z, Scaling& w) {
  if ((s.l.array() <= 0.0).any() || (z.l.array() <= 0.0).any()) return false;
  w.d = (s.l.array() / z.l.array()).sqrt().matrix();
  w.lambda.l = (s.l.array() * z.l.array()).sqrt().matrix();
  w.wq.resize(f.gq.size());
  w.wqinv.resize(f.gq.size());
  w.beta.resize(f.gq.size());
  w.lambda.q.resize(f.gq.size());
  for (std::size_t i = 0; i < f.gq.size(); ++i) {
    if (!soc_scaling(s.q[i], z.q[i], w.wq[i], w.wqinv[i], w.beta[i])) return false;
    w.lambda.q[i] = w.wq[i] * z.q[i];
  }
  w.r.resize(f.ps.size());
  w.rinv.resize(f.ps.size());
  w.lambda.s.resize(f.ps.size());
  for (std::size_t k = 0; k < f.ps.size(); ++k) {
    RVector lam;
    if (!psd_scaling(s.s[k], z.s[k], w.r[k], w.rinv[k], lam)) return false;
    w.lambda.s[k] = lam.asDiagonal();
  }
  return true;
}

Scaling identity_scaling(const StandardForm& f) {
  Scaling w;
  w.d = RVector::Ones(f.gl.rows());
  for (const auto& g : f.gq) {
    w.wq.push_back(RMatrix::Identity(g.rows(), g.rows()));
    w.wqinv.push_back(RMatrix::Identity(g.rows(), g.rows()));
    w.beta.push_back(1.0);
  }
  for (const auto& p : f.ps) {
    w.r.push_back(RMatrix::Identity(p.dim, p.dim));
    w.rinv.push_back(RMatrix::Identity(p.dim, p.dim));
  }
  return w;
}

// W z
ConeVec scale_z(const Scaling& w, const ConeVec& z) {
  ConeVec o;
  o.l = w.d.cwiseProduct(z.l);
  for (std::size_t i = 0; i < z.q.size(); ++i) o.q.push_back(w.wq[i] * z.q[i]);
  for (std::size_t k = 0; k < z.s.size(); ++k) o.s.push_back(w.r[k].transpose() * z.s[k] * w.r[k]);
  return o;
}

// W^T u
ConeVec unscale_s(const Scaling& w, const ConeVec& u) {
  ConeVec o;
  o.l = w.d.cwiseProduct(u.l);
  for (std::size_t i = 0; i < u.q.size(); ++i) o.q.push_back(w.wq[i] * u.q[i]);
  for (std::size_t k = 0; k < u.s.size(); ++k) o.s.push_back(w.r[k] * u.s[k] * w.r[k].transpose());
  return o;
}

// W^{-T} s
ConeVec scale_s(const Scaling& w, const ConeVec& s) {
  ConeVec o;
  o.l = s.l.cwiseQuotient(w.d);
  for (std::size_t i = 0; i < s.q.size(); ++i) o.q.push_back(w.wqinv[i] * s.q[i]);
  for (std::size_t k = 0; k < s.s.size(); ++k) o.s.push_back(w.rinv[k] * s.s[k] * w.rinv[k].transpose());
  return o;
}

// W^{-1} u
ConeVec unscale_z(const Scaling& w, const ConeVec& u) {
  ConeVec o;
  o.l = u.l.cwiseQuotient(w.d);
  for (std::size_t i = 0; i < u.q.size(); ++i) o.q.push_back(w.wqinv[i] * u.q[i]);
  for (std::size_t k = 0; k < u.s.size(); ++k) o.s.push_back(w.rinv[k].transpose() * u.s[k] * w.rinv[k]);
  return o;
}


// W^T W u
ConeVec apply_wtw(const Scaling& w, const ConeVec& u) {
  ConeVec o;
  o.l = u.l.cwiseProduct(w.d.cwiseProduct(w.d));
  for (std::size_t i = 0; i < u.q.size(); ++i) o.q.push_back(w.wq[i] * (w.wq[i] * u.q[i]));
  for (std::size_t k = 0; k < u.s.size(); ++k) {
    const RMatrix t = w.r[k].transpose() * u.s[k] * w.r[k];
    o.s.push_back(w.r[k] * t * w.r[k].transpose());
  }
  return o;
}

ConeVec jordan(const ConeVec& u, const ConeVec& v) {
  ConeVec o;
  o.l = u.l.cwiseProduct(v.l);
  for (std::size_t i = 0; i < u.q.size(); ++i) {
    const auto& a = u.q[i];
    const auto& b = v.q[i];
    RVector r(a.size());
    r(0) = a.dot(b);
    r.tail(a.size() - 1) = a(0) * b.tail(b.size() - 1) + b(0) * a.tail(a.size() - 1);
    o.q.push_back(r);
  }
  for (std::size_t k = 0; k < u.s.size(); ++k) o.s.push_back(0.5 * (u.s[k] * v.s[k] + v.s[k] * u.s[k]));
  return o;
}

// Solves lambda o x = v.
ConeVec lambda_solve(const ConeVec& lam, const ConeVec& v) {
  ConeVec o;
  o.l = v.l.cwiseQuotient(lam.l);
  for (std::size_t i = 0; i < lam.q.size(); ++i) {
    const auto& l = lam.q[i];
    const auto& b = v.q[i];
    const int m = static_cast<int>(l.size());
    const double l0 = l(0);
    const auto l1 = l.tail(m - 1);
    const auto b1 = b.tail(m - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    RVector x(m);
    x(0) = (l0 * b(0) - l1.dot(b1)) / det;
    x.tail(m - 1) = (b1 - x(0) * l1) / l0;
    o.q.push_back(x);
  }
  for (std::size_t k = 0; k < lam.s.size(); ++k) {
    const RVector dl = lam.s[k].diagonal();
    RMatrix x = v.s[k];
    for (int j = 0; j < x.cols(); ++j)
      for (int i = 0; i < x.rows(); ++i) x(i, j) *= 2.0 / (dl(i) + dl(j));
    o.s.push_back(x);
  }
  return o;
}

double soc_max_step(const RVector& lam, const RVector& d) {
  const int m = static_cast<int>(lam.size());
  const double a = d(0) * d(0) - d.tail(m - 1).squaredNorm();
  const double b = lam(0) * d(0) - lam.tail(m - 1).dot(d.tail(m - 1));
  const double c = lam(0) * lam(0) - lam.tail(m - 1).squaredNorm();
  double best = kInf;
  auto consider = [&](double r) {
    if (r > 0.0 && r < best) best = r;
  };
  if (std::abs(a) <= 1e-300) {
    if (b < 0.0) consider(-c / (2.0 * b));
  } else {
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double qq = -(b + (b >= 0.0 ? sq : -sq));
      if (qq != 0.0) {
        consider(qq / a);
        consider(c / qq);
      }
    }
  }
  if (d(0) < 0.0) consider(-lam(0) / d(0));
  return best;
}

// Largest alpha with lam + alpha * d in the cone (lam scaled, diagonal PSD parts).
double max_step(const ConeVec& lam, const ConeVec& d) {
  double best = kInf;
  for (Eigen::Index i = 0; i < lam.l.size(); ++i)
    if (d.l(i) < 0.0) best = std::min(best, -lam.l(i) / d.l(i));
  for (std::size_t i = 0; i < lam.q.size(); ++i) best = std::min(best, soc_max_step(lam.q[i], d.q[i]));
  for (std::size_t k = 0; k < lam.s.size(); ++k) {
    const RVector isq = lam.s[k].diagonal().cwiseSqrt().cwiseInverse();
    RMatrix m = isq.asDiagonal() * d.s[k] * isq.asDiagonal();
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<RMatrix> es(m, Eigen::EigenvaluesOnly);
    const double mn = es.eigenvalues()(0);
    if (mn < 0.0) best = std::min(best, -1.0 / mn);
  }
  return best;
}

// Minimum "eigenvalue" of u with respect to the cone, for interior shifts.
double min_cone_eig(const ConeVec& u) {
  double mn = kInf;
  if (u.l.size()) mn = std::min(mn, u.l.minCoeff());
  for (const auto& v : u.q) mn = std::min(mn, v(0) - v.tail(v.size() - 1).norm());
  for (const auto& m : u.s) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    mn = std::min(mn, es.eigenvalues()(0));
  }
  return mn;
}

int cone_dim(const StandardForm& f) {
  int m = static_cast<int>(f.gl.rows());
  for (const auto& g : f.gq) m += static_cast<int>(g.rows());
  for (const auto& d : f.ps) m += d.dim * (d.dim + 1) / 2;
  return m;
}

// Flattens a cone vector; PSD blocks use svec (lower triangle, off-diagonals
// scaled by sqrt 2) so inner products are preserved.
RVector flatten(const ConeVec& u, int m) {
  RVector out(m);
  int o = 0;
  out.segment(o, u.l.size()) = u.l;
  o += static_cast<int>(u.l.size());
  for (const auto& v : u.q) {
    out.segment(o, v.size()) = v;
    o += static_cast<int>(v.size());
  }
  for (const auto& s : u.s) {
    const int d = static_cast<int>(s.rows());
    for (int j = 0; j < d; ++j) {
      out(o++) = s(j, j);
      for (int i = j + 1; i < d; ++i) out(o++) = M_SQRT2 * 0.5 * (s(i, j) + s(j, i));
    }
  }
  return out;
}

ConeVec unflatten(const StandardForm& f, const RVector& x) {
  ConeVec u;
  int o = 0;
  const int ml = static_cast<int>(f.gl.rows());
  u.l = x.segment(o, ml);
  o += ml;
  for (const auto& g : f.gq) {
    u.q.push_back(x.segment(o, g.rows()));
    o += static_cast<int>(g.rows());
  }
  for (const auto& p : f.ps) {
    RMatrix s(p.dim, p.dim);
    for (int j = 0; j < p.dim; ++j) {
      s(j, j) = x(o++);
      for (int i = j + 1; i < p.dim; ++i) s(i, j) = s(j, i) = x(o++) / M_SQRT2;
    }
    u.s.push_back(std::move(s));
  }
  return u;
}

// Solves the KKT system through the scaled constraint matrix Gs = W^{-T} G.
// Without equalities a Householder QR of Gs is used, which keeps the
// conditioning of Gs rather than of Gs'Gs.
class KktSolver {
 public:
  explicit KktSolver(const StandardForm& f) : f_(f), m_(cone_dim(f)) {}

  bool factor(const Scaling& w) {
    w_ = &w;
    const int n = f_.n;
    gs_.resize(m_, n);
    int o = 0;
    const int ml = static_cast<int>(f_.gl.rows());
    if (ml > 0) gs_.topRows(ml) = w.d.cwiseInverse().asDiagonal() * f_.gl;
    o += ml;
    for (std::size_t i = 0; i < f_.gq.size(); ++i) {
      const int mq = static_cast<int>(f_.gq[i].rows());
      gs_.middleRows(o, mq) = w.wqinv[i] * f_.gq[i];
      o += mq;
    }
    for (std::size_t k = 0; k < f_.ps.size(); ++k) {
      const int rows = f_.ps[k].dim * (f_.ps[k].dim + 1) / 2;
      fill_psd_block(k, o);
      o += rows;
    }
    const int p = static_cast<int>(f_.a.rows());
    use_qr_ = p == 0 && m_ >= n;
    if (use_qr_) {
      qr_.compute(gs_);
      const RVector diag = qr_.matrixQR().diagonal().head(n).cwiseAbs();
      const double mx = diag.size() ? diag.maxCoeff() : 0.0;
      if (!(mx > 0.0) || diag.minCoeff() <= 1e-15 * mx) use_qr_ = false;
    }
    if (!use_qr_) {
      RMatrix h = gs_.transpose() * gs_;
      const double reg = 1e-13 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      RMatrix kk = RMatrix::Zero(n + p, n + p);
      kk.topLeftCorner(n, n) = h + reg * RMatrix::Identity(n, n);
      kk.topRightCorner(n, p) = f_.a.transpose();
      kk.bottomLeftCorner(p, n) = f_.a;
      lu_.compute(kk);
      if (!lu_.matrixLU().allFinite()) return false;
    }
    return true;
  }

  // Solves [0 A' G'; A 0 0; G 0 -W'W] [u; v; w] = [px; py; pz] with
  // iterative refinement on the full system.
  bool solve(const RVector& px, const RVector& py, const ConeVec& pz, RVector& u, RVector& v, ConeVec& wz) const {
    solve_once(px, py, pz, u, v, wz);
    for (int it = 0; it < 2; ++it) {
      const RVector r1 = px - f_.a.transpose() * v - apply_gt(f_, wz);
      const RVector r2 = py - f_.a * u;
      ConeVec r3 = pz;
      axpy(-1.0, apply_g(f_, u), r3);
      axpy(1.0, apply_wtw(*w_, wz), r3);
      RVector du, dv;
      ConeVec dw;
      solve_once(r1, r2, r3, du, dv, dw);
      u += du;
      v += dv;
      axpy(1.0, dw, wz);
    }
    return u.allFinite() && v.allFinite() && std::isfinite(norm(wz));
  }

 private:
  void solve_once(const RVector& px, const RVector& py, const ConeVec& pz, RVector& u, RVector& v, ConeVec& wz) const {
    const int n = f_.n;
    const int p = static_cast<int>(f_.a.rows());
    const RVector pzs = flatten(scale_s(*w_, pz), m_);
    if (use_qr_) {
      const auto r = qr_.matrixQR().topRows(n).triangularView<Eigen::Upper>();
      RVector qtp = qr_.householderQ().transpose() * pzs;
      RVector t = r.transpose().solve(px);
      t += qtp.head(n);
      u = r.solve(t);
      v.resize(0);
    } else {
      RVector rhs(n + p);
      rhs.head(n) = px + gs_.transpose() * pzs;
      rhs.tail(p) = py;
      const RVector sol = lu_.solve(rhs);
      u = sol.head(n);
      v = sol.tail(p);
    }
    const RVector res = gs_ * u - pzs;
    wz = unscale_z(*w_, unflatten(f_, res));
  }

  void fill_psd_block(std::size_t k, int row0) {
    const auto& d = f_.ps[k];
    const RMatrix& ri = w_->rinv[k];
    const int dim = d.dim;
    const int rows = dim * (dim + 1) / 2;
    gs_.middleRows(row0, rows).setZero();
    RMatrix m(dim, dim), dense(dim, dim);
    for (std::size_t j = 0; j < d.vars.size(); ++j) {
      const auto& ej = d.coeffs[j];
      if (static_cast<int>(ej.size()) < dim) {
        m.setZero();
        for (const auto& e : ej) m.noalias() -= e.value * ri.col(e.row) * ri.col(e.col).transpose();
      } else {
        dense.setZero();
        for (const auto& e : ej) dense(e.row, e.col) -= e.value;
        m.noalias() = ri * dense * ri.transpose();
      }
      int o = row0;
      for (int c = 0; c < dim; ++c) {
        gs_(o++, d.vars[j]) += m(c, c);
        for (int r = c + 1; r < dim; ++r) gs_(o++, d.vars[j]) += M_SQRT2 * 0.5 * (m(r, c) + m(c, r));
      }
    }
  }

  const StandardForm& f_;
  int m_;
  const Scaling* w_ = nullptr;
  RMatrix gs_;
  Eigen::HouseholderQR<RMatrix> qr_;
  Eigen::PartialPivLU<RMatrix> lu_;
  bool use_qr_ = true;
};

struct Residuals {
  RVector rx, ry;
  ConeVec rz;
  double rt = 0.0;
  double hresx = 0.0, hresy = 0.0, hresz = 0.0;
  double cx = 0.0, by = 0.0, hz = 0.0;
};

}  // namespace

ConicSolution solve(const ConicProgram& program, const SolverSettings& settings) {
  program.validate();
  const StandardForm f = to_standard(program);
  ConicSolution out;
  if (f.degree == 0) throw Error(ErrorCode::InvalidArgument, "program has no conic constraints");

  const int n = f.n;
  const ConeVec h = h_vec(f);
  const ConeVec e = identity_like(f);
  const double resx0 = std::max(1.0, f.c.norm());
  const double resy0 = std::max(1.0, f.b.norm());
  const double resz0 = std::max(1.0, norm(h));

  KktSolver kkt(f);

  // Starting point from two least-squares solves with W = I, then shifted into the cone interior.
  Scaling w = identity_scaling(f);
  kkt.factor(w);
  RVector x, y, xtmp, ytmp;
  ConeVec s, z;
  {
    ConeVec wz;
    if (!kkt.solve(RVector::Zero(n), f.b, h, x, ytmp, wz)) {
      out.diagnostics = "initial primal solve failed";
      return out;
    }
    s = scaled(-1.0, wz);
    if (!kkt.solve(-f.c, RVector::Zero(f.a.rows()), scaled(0.0, h), xtmp, y, z)) {
      out.diagnostics = "initial dual solve failed";
      return out;
    }
    const double ts = -min_cone_eig(s);
    if (ts >= -1e-8 * std::max(norm(s), 1.0)) axpy(1.0 + ts, e, s);
    const double tz = -min_cone_eig(z);
    if (tz >= -1e-8 * std::max(norm(z), 1.0)) axpy(1.0 + tz, e, z);
  }
  double tau = 1.0, kappa = 1.0;

  if (!compute_scaling(f, s, z, w)) {
    out.diagnostics = "initial scaling failed";
    return out;
  }

  auto residuals = [&]() {
    Residuals r;
    const RVector hrx = f.a.transpose() * y + apply_gt(f, z);
    r.rx = hrx + tau * f.c;
    const RVector hry = f.a * x;
    r.ry = hry - tau * f.b;
    ConeVec hrz = apply_g(f, x);
    axpy(1.0, s, hrz);
    r.hresx = hrx.norm();
    r.hresy = hry.norm();
    r.hresz = norm(hrz);
    r.rz = hrz;
    axpy(-tau, h, r.rz);
    r.cx = f.c.dot(x);
    r.by = f.b.dot(y);
    r.hz = dot(h, z);
    r.rt = kappa + r.cx + r.by + r.hz;
    return r;
  };

  struct Metrics {
    double pcost, dcost, pres, dres, gap;
  };
  auto metrics = [&](const Residuals& r) {
    Metrics m;
    m.pcost = r.cx / tau;
    m.dcost = -(r.by + r.hz) / tau;
    m.pres = std::max(r.ry.norm() / tau / resy0, norm(r.rz) / tau / resz0);
    m.dres = r.rx.norm() / tau / resx0;
    m.gap = std::max(dot(s, z) / (tau * tau), std::abs(m.pcost - m.dcost));
    return m;
  };

  auto finish_optimal = [&](const Metrics& m, int iters) {
    out.status = SolveStatus::Optimal;
    out.primal_values = x / tau;
    out.objective_value = m.pcost;
    out.dual_objective = m.dcost;
    out.duality_gap = m.gap;
    out.kkt_residual = std::max(m.pres, m.dres);
    out.iterations = iters;
  };

  auto acceptable = [&](const Metrics& m, double tol) {
    return m.pres <= tol && m.dres <= tol && m.gap <= tol * (1.0 + std::abs(m.pcost));
  };

  // Best iterate seen so far, returned when progress stalls.
  double best_score = kInf;
  RVector best_x;
  Metrics best_m{};
  int best_iter = 0;

  auto stall = [&](const char* why, int iters) {
    const Residuals r = residuals();
    const Metrics m = metrics(r);
    if (best_score <= settings.accept_tol) {
      finish_optimal(best_m, best_iter);
      out.primal_values = best_x;
      out.diagnostics = std::string("accepted at reduced accuracy after: ") + why;
      return;
    }
    out.status = SolveStatus::NumericalFailure;
    out.primal_values = x / tau;
    out.objective_value = m.pcost;
    out.dual_objective = m.dcost;
    out.duality_gap = m.gap;
    out.kkt_residual = std::max(m.pres, m.dres);
    out.iterations = iters;
    std::ostringstream os;
    os << why << " at iteration " << iters << " (pres " << m.pres << ", dres " << m.dres << ", gap " << m.gap << ")";
    out.diagnostics = os.str();
  };

  const double nu1 = static_cast<double>(f.degree) + 1.0;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    const Residuals r = residuals();
    const Metrics m = metrics(r);
    const double gap_raw = dot(s, z);
    const double score = std::max({m.pres, m.dres, m.gap / (1.0 + std::abs(m.pcost))});
    if (score < best_score) {
      best_score = score;
      best_x = x / tau;
      best_m = m;
      best_iter = iter;
    }

    if (acceptable(m, settings.feas_tol) && m.gap <= settings.gap_tol * (1.0 + std::abs(m.pcost)) &&
        m.gap <= settings.abs_gap_tol) {
      finish_optimal(m, iter);
      return out;
    }
    // Certificates of infeasibility.
    if (r.hz + r.by < 0.0) {
      const double pinf = r.hresx / resx0 / (-(r.hz + r.by));
      if (pinf <= settings.feas_tol) {
        out.status = SolveStatus::Infeasible;
        out.iterations = iter;
        out.primal_values = x / tau;
        out.diagnostics = "primal infeasibility certificate found";
        return out;
      }
    }
    if (r.cx < 0.0) {
      const double dinf = std::max(r.hresy / resy0, r.hresz / resz0) / (-r.cx);
      if (dinf <= settings.feas_tol) {
        out.status = SolveStatus::Infeasible;
        out.iterations = iter;
        out.primal_values = x / tau;
        out.diagnostics = "dual infeasibility certificate found (primal unbounded)";
        return out;
      }
    }
    if (iter == settings.max_iterations) {
      if (best_score <= settings.accept_tol) {
        stall("iteration limit", iter);
        return out;
      }
      out.status = SolveStatus::MaxIter;
      out.primal_values = x / tau;
      out.objective_value = m.pcost;
      out.dual_objective = m.dcost;
      out.duality_gap = m.gap;
      out.kkt_residual = std::max(m.pres, m.dres);
      out.iterations = iter;
      out.diagnostics = "iteration limit reached";
      return out;
    }

    if (!kkt.factor(w)) {
      stall("KKT factorization failed", iter);
      return out;
    }
    const ConeVec& lam = w.lambda;
    const double mu = (gap_raw + tau * kappa) / nu1;

    // Direction for the tau column.
    RVector x1, y1;
    ConeVec z1;
    if (!kkt.solve(-f.c, f.b, h, x1, y1, z1)) {
      stall("KKT solve failed", iter);
      return out;
    }
    const double tau_coef = -kappa / tau + f.c.dot(x1) + f.b.dot(y1) + dot(h, z1);

    struct Dir {
      RVector dx, dy;
      ConeVec dz, ds;      // unscaled
      ConeVec dz_s, ds_s;  // scaled
      double dtau, dkappa;
    };

    auto direction = [&](double eta, const ConeVec& dsz, double dtk, Dir& dir) {
      const ConeVec lsolved = lambda_solve(lam, dsz);
      ConeVec pz = scaled(-eta, r.rz);
      axpy(-1.0, unscale_s(w, lsolved), pz);
      RVector x0, y0;
      ConeVec z0;
      if (!kkt.solve(-eta * r.rx, -eta * r.ry, pz, x0, y0, z0)) return false;
      const double rhs = -eta * r.rt - dtk / tau - (f.c.dot(x0) + f.b.dot(y0) + dot(h, z0));
      dir.dtau = rhs / tau_coef;
      dir.dx = x0 + dir.dtau * x1;
      dir.dy = y0 + dir.dtau * y1;
      dir.dz = z0;
      axpy(dir.dtau, z1, dir.dz);
      dir.dz_s = scale_z(w, dir.dz);
      // ds from the linearized primal residual equation, so that residuals
      // shrink exactly by the step factor.
      dir.ds = scaled(-eta, r.rz);
      axpy(-1.0, apply_g(f, dir.dx), dir.ds);
      axpy(dir.dtau, h, dir.ds);
      dir.ds_s = scale_s(w, dir.ds);
      dir.dkappa = (dtk - kappa * dir.dtau) / tau;
      return dir.dx.allFinite() && std::isfinite(dir.dtau);
    };

    auto step_to_boundary = [&](const Dir& dir) {
      double a = std::min(max_step(lam, dir.ds_s), max_step(lam, dir.dz_s));
      if (dir.dtau < 0.0) a = std::min(a, -tau / dir.dtau);
      if (dir.dkappa < 0.0) a = std::min(a, -kappa / dir.dkappa);
      return a;
    };

    Dir aff;
    const ConeVec lamsq = jordan(lam, lam);
    if (!direction(1.0, scaled(-1.0, lamsq), -tau * kappa, aff)) {
      stall("affine direction failed", iter);
      return out;
    }
    const double a_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - a_aff, 3.0);

    ConeVec dsz = scaled(-1.0, lamsq);
    axpy(sigma * mu, e, dsz);
    axpy(-1.0, jordan(aff.ds_s, aff.dz_s), dsz);
    const double dtk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    Dir cmb;
    if (!direction(1.0 - sigma, dsz, dtk, cmb)) {
      stall("combined direction failed", iter);
      return out;
    }
    const double alpha = std::min(1.0, settings.step_fraction * step_to_boundary(cmb));
    out.history.push_back({m.pcost, m.dcost, m.pres, m.dres, m.gap, alpha});
    if (!(alpha > 1e-12)) {
      stall("step length collapsed", iter);
      return out;
    }

    // Update iterates: new scaled slacks relative to the current scaling.
    ConeVec s_sc = lam;
    axpy(alpha, cmb.ds_s, s_sc);
    ConeVec z_sc = lam;
    axpy(alpha, cmb.dz_s, z_sc);
    x += alpha * cmb.dx;
    y += alpha * cmb.dy;
    tau += alpha * cmb.dtau;
    kappa += alpha * cmb.dkappa;

    ConeVec s_new = s;
    axpy(alpha, cmb.ds, s_new);
    ConeVec z_new = z;
    axpy(alpha, cmb.dz, z_new);
    Scaling w_new;
    w_new.d = (s_new.l.array() / z_new.l.array()).sqrt().matrix();
    w_new.lambda.l = (s_new.l.array() * z_new.l.array()).sqrt().matrix();
    bool ok = (s_new.l.array() > 0.0).all() && (z_new.l.array() > 0.0).all();
    w_new.wq.resize(f.gq.size());
    w_new.wqinv.resize(f.gq.size());
    w_new.beta.resize(f.gq.size());
    w_new.lambda.q.resize(f.gq.size());
    for (std::size_t i = 0; ok && i < f.gq.size(); ++i) {
      const double b2 = w.beta[i] * w.beta[i];
      ok = soc_scaling(s_new.q[i], z_new.q[i], b2 * jnorm2(s_sc.q[i]), jnorm2(z_sc.q[i]) / b2, z_sc.q[i].dot(s_sc.q[i]),
                       w_new.wq[i], w_new.wqinv[i], w_new.beta[i]);
      if (ok) w_new.lambda.q[i] = w_new.wq[i] * z_new.q[i];
    }
    w_new.r.resize(f.ps.size());
    w_new.rinv.resize(f.ps.size());
    w_new.lambda.s.resize(f.ps.size());
    for (std::size_t k = 0; ok && k < f.ps.size(); ++k) {
      RMatrix rt, rtinv;
      RVector lamk;
      const RMatrix ss = 0.5 * (s_sc.s[k] + s_sc.s[k].transpose());
      const RMatrix zz = 0.5 * (z_sc.s[k] + z_sc.s[k].transpose());
      ok = psd_scaling(ss, zz, rt, rtinv, lamk);
      if (ok) {
        w_new.r[k] = w.r[k] * rt;
        w_new.rinv[k] = rtinv * w.rinv[k];
        w_new.lambda.s[k] = lamk.asDiagonal();
      }
    }
    s = std::move(s_new);
    z = std::move(z_new);
    if (!ok || !x.allFinite() || !(tau > 0.0) || !(kappa >= 0.0)) {
      stall("scaling update failed", iter + 1);
      return out;
    }
    w = std::move(w_new);
  }
  stall("loop exit", settings.max_iterations);
  return out;
}

}  // namespace relaynet::conic
