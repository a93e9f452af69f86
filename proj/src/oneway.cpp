#include "relaynet/oneway.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace relaynet {

namespace {

using conic::AffineScalar;
using conic::ConicProgram;
using conic::HermitianAffineMatrix;
using conic::SocConstraint;

// Complex matrix unknown stored as interleaved (re, im) real variables in
// column-major order. base < 0 marks a matrix fixed at zero.
struct ComplexVar {
  int base = -1;
  int rows = 0;
  int cols = 0;

  bool fixed() const { return base < 0; }
  int re(int i, int j) const { return base + 2 * (i + rows * j); }
  int im(int i, int j) const { return re(i, j) + 1; }
  CMatrix value(const RVector& x) const {
    CMatrix m = CMatrix::Zero(rows, cols);
    if (fixed()) return m;
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = cplx(x(re(i, j)), x(im(i, j)));
    return m;
  }
};

ComplexVar add_complex(ConicProgram& p, int rows, int cols) { return {p.add_variables(2 * rows * cols), rows, cols}; }

// Hermitian n x n unknown: n real diagonal entries, then (re, im) pairs for
// the strict upper triangle.
struct HermVar {
  int base = 0;
  int n = 0;

  int count() const { return n * n; }
  int var(int t) const { return base + t; }
  bool diagonal(int t) const { return t < n; }
  CMatrix basis(int t) const {
    CMatrix e = CMatrix::Zero(n, n);
    if (t < n) {
      e(t, t) = 1.0;
      return e;
    }
    int pair = (t - n) / 2;
    const bool imag = (t - n) % 2 == 1;
    for (int j = 1; j < n; ++j)
      for (int i = 0; i < j; ++i) {
        if (pair-- != 0) continue;
        if (imag) {
          e(i, j) = cplx(0.0, 1.0);
          e(j, i) = cplx(0.0, -1.0);
        } else {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
        }
        return e;
      }
    return e;
  }
  CMatrix value(const RVector& x) const {
    CMatrix m = CMatrix::Zero(n, n);
    for (int t = 0; t < count(); ++t) m += x(var(t)) * basis(t);
    return m;
  }
};

HermVar add_hermitian(ConicProgram& p, int n) { return {p.add_variables(n * n), n}; }

// Complex affine vector c0 + M x over the program's real variables.
struct CAffine {
  CVector c0;
  CMatrix m;
  CAffine(Eigen::Index len, int nvar) : c0(CVector::Zero(len)), m(CMatrix::Zero(len, nvar)) {}
};

void push_real_rows(const CAffine& a, std::vector<AffineScalar>& out, double scale = 1.0) {
  for (Eigen::Index i = 0; i < a.c0.size(); ++i) {
    AffineScalar re(scale * a.c0(i).real());
    AffineScalar im(scale * a.c0(i).imag());
    for (Eigen::Index v = 0; v < a.m.cols(); ++v) {
      re.add(static_cast<int>(v), scale * a.m(i, v).real());
      im.add(static_cast<int>(v), scale * a.m(i, v).imag());
    }
    out.push_back(std::move(re));
    out.push_back(std::move(im));
  }
}

// ||v||^2 <= u  as  ||(2v, u - 1)|| <= u + 1
SocConstraint rotated_cone(const CAffine& v, AffineScalar u) {
  SocConstraint s;
  push_real_rows(v, s.v, 2.0);
  AffineScalar lo = u;
  lo.constant -= 1.0;
  s.v.push_back(lo);
  s.t = u;
  s.t.constant += 1.0;
  return s;
}

SocConstraint norm_cone(const CAffine& v, double bound) {
  SocConstraint s;
  push_real_rows(v, s.v);
  s.t = AffineScalar(bound);
  return s;
}

// Lower Cholesky factor L with L L^H = a.
CMatrix chol_factor(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(linalg::hermitian_part(a));
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotHpd, "covariance factorization failed");
  return llt.matrixL();
}

conic::ConicSolution run_program(const std::string& tag, const ConicProgram& p, const SubproblemOptions& opt,
                                 SubproblemStats& st) {
  if (opt.dump) opt.dump(tag, p);
  conic::ConicSolution sol = conic::solve(p, opt.solver);
  st.name = tag;
  st.status = sol.status;
  st.iterations = sol.iterations;
  st.objective = sol.objective_value;
  st.duality_gap = sol.duality_gap;
  st.kkt_residual = sol.kkt_residual;
  if (!sol.optimal()) {
    std::ostringstream os;
    os << tag << ": solver status " << conic::to_string(sol.status) << " after " << sol.iterations
       << " iterations (" << sol.diagnostics << ")";
    throw Error(sol.status == conic::SolveStatus::Infeasible ? ErrorCode::Infeasible : ErrorCode::SolverFailure,
                os.str());
  }
  return sol;
}

void require_receivers(const SystemConfig& cfg, const std::vector<CMatrix>& w) {
  if (static_cast<int>(w.size()) != cfg.receivers())
    throw Error(ErrorCode::DimensionMismatch, "one receiver per destination required");
  for (int k = 0; k < cfg.receivers(); ++k)
    if (w[k].rows() != cfg.rx_antennas(k) || w[k].cols() != cfg.rx_streams(k))
      throw Error(ErrorCode::DimensionMismatch, "receiver shape differs from configuration");
}

std::vector<ComplexVar> add_precoders(const SystemConfig& cfg, ConicProgram& p) {
  std::vector<ComplexVar> vars;
  for (int j = 0; j < cfg.transmitters(); ++j) {
    if (cfg.p_s[j] > 0.0)
      vars.push_back(add_complex(p, cfg.tx_antennas(j), cfg.streams(j)));
    else
      vars.push_back({-1, cfg.tx_antennas(j), cfg.streams(j)});
  }
  return vars;
}

// Adds vec(M B) as a function of B's variables to rows starting at offset.
void add_left_product(CAffine& a, Eigen::Index offset, const CMatrix& m, const ComplexVar& bv) {
  if (bv.fixed()) return;
  const Eigen::Index r = m.rows();
  for (int q = 0; q < bv.cols; ++q)
    for (int pr = 0; pr < bv.rows; ++pr)
      for (Eigen::Index i = 0; i < r; ++i) {
        const cplx c = m(i, pr);
        if (c == 0.0) continue;
        a.m(offset + i + r * q, bv.re(pr, q)) += c;
        a.m(offset + i + r * q, bv.im(pr, q)) += cplx(0.0, 1.0) * c;
      }
}

// 2 Re tr(M B) as a real affine expression of B's variables.
void add_trace_term(AffineScalar& s, const CMatrix& m, const ComplexVar& bv, double scale) {
  if (bv.fixed()) return;
  for (int q = 0; q < bv.cols; ++q)
    for (int pr = 0; pr < bv.rows; ++pr) {
      const cplx c = m(q, pr);
      s.add(bv.re(pr, q), scale * c.real());
      s.add(bv.im(pr, q), -scale * c.imag());
    }
}

// Orthogonal projector onto span of the given columns (numerical rank).
CMatrix range_projector(const CMatrix& cols, Eigen::Index n) {
  if (cols.cols() == 0) return CMatrix::Zero(n, n);
  const linalg::HermitianEVD evd = linalg::hermitian_evd(linalg::hermitian_part(cols * cols.adjoint()));
  const double top = evd.eigenvalues.size() ? evd.eigenvalues(0) : 0.0;
  CMatrix p = CMatrix::Zero(n, n);
  if (!(top > 0.0)) return p;
  for (Eigen::Index i = 0; i < evd.eigenvalues.size(); ++i)
    if (evd.eigenvalues(i) > 1e-12 * top) p += evd.eigenvectors.col(i) * evd.eigenvectors.col(i).adjoint();
  return p;
}

void fit_relay_budget(const SystemConfig& cfg, const CMatrix& psi, CMatrix& f) {
  const double pw = relay_power(f, psi);
  if (pw > cfg.p_r) f *= std::sqrt(cfg.p_r / pw);
}

void fit_source_budgets(const SystemConfig& cfg, const ChannelRealization& ch, const CMatrix& f,
                        std::vector<CMatrix>& b) {
  for (int j = 0; j < cfg.transmitters(); ++j) {
    const double pw = b[j].squaredNorm();
    if (pw > cfg.p_s[j]) b[j] *= pw > 0.0 ? std::sqrt(cfg.p_s[j] / pw) : 0.0;
  }
  const double noise = cfg.sigma2_r * f.squaredNorm();
  double signal = 0.0;
  for (int j = 0; j < cfg.transmitters(); ++j) signal += (f * tx_channel(cfg, ch, j) * b[j]).squaredNorm();
  if (signal + noise > cfg.p_r && signal > 0.0) {
    const double c = std::sqrt(std::max(0.0, cfg.p_r - noise) / signal);
    for (auto& bj : b) bj *= c;
  }
}

std::vector<CMatrix> initial_precoders(const SystemConfig& cfg) {
  std::vector<CMatrix> b;
  for (int j = 0; j < cfg.transmitters(); ++j)
    b.push_back(std::sqrt(cfg.p_s[j] / cfg.streams(j)) * CMatrix::Identity(cfg.tx_antennas(j), cfg.streams(j)));
  return b;
}

}  // namespace

std::vector<CMatrix> mmse_receivers(const SystemConfig& cfg, const ChannelRealization& ch,
                                    const std::vector<CMatrix>& b, const CMatrix& f) {
  return link_mmse_receivers(cfg, ch, b, f);
}

RelayStep relay_subproblem(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                           const std::vector<CMatrix>& w, const SubproblemOptions& opt) {
  cfg.validate();
  require_receivers(cfg, w);
  const int nr = cfg.n_r;
  const CMatrix psi = received_covariance(cfg, ch, b);
  RelayStep out;
  if (cfg.p_r <= 0.0) {
    out.f = CMatrix::Zero(nr, nr);
    out.stats.name = "relay";
    out.stats.status = conic::SolveStatus::Optimal;
    TransceiverDesign d{b, out.f, w};
    out.tau = worst_mse(cfg, ch, d);
    out.stats.objective = out.tau;
    return out;
  }

  ConicProgram p;
  const int tau = p.add_variable();
  p.set_objective(tau, 1.0);
  const ComplexVar fv = add_complex(p, nr, nr);

  struct Link {
    CMatrix u;   // W^H R
    CMatrix hb;  // H_d B_d
    CMatrix psi_k;
    double c;
  };
  std::vector<Link> links;
  for (int k = 0; k < cfg.receivers(); ++k) {
    const int d = desired_transmitter(cfg, k);
    Link l;
    l.u = w[k].adjoint() * rx_channel(cfg, ch, k);
    l.hb = tx_channel(cfg, ch, d) * b[d];
    l.psi_k = effective_covariance(cfg, ch, b, k);
    l.c = cfg.rx_streams(k) + cfg.sigma2_d * w[k].squaredNorm();
    links.push_back(std::move(l));
  }

  if (opt.formulation == Formulation::Cone) {
    for (const Link& l : links) {
      const CMatrix lf = chol_factor(l.psi_k);
      const Eigen::Index nb = l.u.rows();
      // vec(U F L): entry (a, c) depends on F(p, q) through U(a, p) L(q, c).
      CAffine v(nb * nr, p.var_count);
      AffineScalar u(-l.c);
      u.add(tau, 1.0);
      for (int q = 0; q < nr; ++q)
        for (int pr = 0; pr < nr; ++pr) {
          for (int c = 0; c < nr; ++c)
            for (Eigen::Index a = 0; a < nb; ++a) {
              const cplx coef = l.u(a, pr) * lf(q, c);
              v.m(a + nb * c, fv.re(pr, q)) += coef;
              v.m(a + nb * c, fv.im(pr, q)) += cplx(0.0, 1.0) * coef;
            }
          // 2 Re tr(U E_pq HB) = 2 Re sum_a HB(q, a) U(a, p)
          const cplx s = (l.hb.row(q) * l.u.col(pr))(0, 0);
          u.add(fv.re(pr, q), 2.0 * s.real());
          u.add(fv.im(pr, q), -2.0 * s.imag());
        }
      p.socs.push_back(rotated_cone(v, u));
    }
    const CMatrix lp = chol_factor(psi);
    CAffine v(nr * nr, p.var_count);
    for (int q = 0; q < nr; ++q)
      for (int pr = 0; pr < nr; ++pr)
        for (int c = 0; c < nr; ++c) {
          v.m(pr + nr * c, fv.re(pr, q)) += lp(q, c);
          v.m(pr + nr * c, fv.im(pr, q)) += cplx(0.0, 1.0) * lp(q, c);
        }
    p.socs.push_back(norm_cone(v, std::sqrt(cfg.p_r)));
  } else {
    for (const Link& l : links) {
      const int nb = static_cast<int>(l.u.rows());
      const HermVar xi = add_hermitian(p, nb);
      HermitianAffineMatrix lmi(nb + nr);
      lmi.constant().block(nb, nb, nr, nr) = linalg::inverse_hpd(l.psi_k);
      AffineScalar epi(-l.c);
      epi.add(tau, 1.0);
      for (int t = 0; t < xi.count(); ++t) {
        CMatrix e = CMatrix::Zero(nb + nr, nb + nr);
        e.block(0, 0, nb, nb) = xi.basis(t);
        lmi.add_term(xi.var(t), e);
        if (xi.diagonal(t)) epi.add(xi.var(t), -1.0);
      }
      for (int q = 0; q < nr; ++q)
        for (int pr = 0; pr < nr; ++pr) {
          CMatrix da = CMatrix::Zero(nb, nr);
          da.col(q) = l.u.col(pr);
          const CMatrix dx = da * l.hb;
          lmi.add_block_pair(fv.re(pr, q), 0, 0, dx);
          lmi.add_block_pair(fv.re(pr, q), 0, nb, da);
          lmi.add_block_pair(fv.im(pr, q), 0, 0, cplx(0.0, 1.0) * dx);
          lmi.add_block_pair(fv.im(pr, q), 0, nb, cplx(0.0, 1.0) * da);
        }
      p.nonneg.push_back(epi);
      p.add_hermitian_psd(lmi);
    }
    const HermVar phi = add_hermitian(p, nr);
    HermitianAffineMatrix lmi(2 * nr);
    lmi.constant().block(nr, nr, nr, nr) = linalg::inverse_hpd(psi);
    AffineScalar budget(cfg.p_r);
    for (int t = 0; t < phi.count(); ++t) {
      CMatrix e = CMatrix::Zero(2 * nr, 2 * nr);
      e.block(0, 0, nr, nr) = phi.basis(t);
      lmi.add_term(phi.var(t), e);
      if (phi.diagonal(t)) budget.add(phi.var(t), -1.0);
    }
    for (int q = 0; q < nr; ++q)
      for (int pr = 0; pr < nr; ++pr) {
        CMatrix e = CMatrix::Zero(nr, nr);
        e(pr, q) = 1.0;
        lmi.add_block_pair(fv.re(pr, q), 0, nr, e);
        lmi.add_block_pair(fv.im(pr, q), 0, nr, cplx(0.0, 1.0) * e);
      }
    p.nonneg.push_back(budget);
    p.add_hermitian_psd(lmi);
  }

  const conic::ConicSolution sol = run_program("relay", p, opt, out.stats);
  CMatrix f = fv.value(sol.primal_values);
  // Only W_k^H R_k F enters the MSE; the component of F outside the span of
  // the R_k^H W_k costs power and nothing else.
  CMatrix cols(nr, 0);
  for (int k = 0; k < cfg.receivers(); ++k) {
    const CMatrix rw = rx_channel(cfg, ch, k).adjoint() * w[k];
    cols.conservativeResize(nr, cols.cols() + rw.cols());
    cols.rightCols(rw.cols()) = rw;
  }
  f = range_projector(cols, nr) * f;
  fit_relay_budget(cfg, psi, f);
  out.f = f;
  out.tau = sol.primal_values(tau);
  return out;
}

SourceStep source_subproblem(const SystemConfig& cfg, const ChannelRealization& ch, const CMatrix& f,
                             const std::vector<CMatrix>& w, const SubproblemOptions& opt) {
  cfg.validate();
  require_receivers(cfg, w);
  if (f.rows() != cfg.n_r || f.cols() != cfg.n_r) throw Error(ErrorCode::DimensionMismatch, "relay matrix must be n_r x n_r");
  const double budget = cfg.p_r - cfg.sigma2_r * f.squaredNorm();
  if (budget <= 0.0) {
    std::ostringstream os;
    os << "relay noise alone uses the relay budget (P_r - sigma_r^2 tr(F F^H) = " << budget << ")";
    throw Error(ErrorCode::Infeasible, os.str());
  }
  const int n = cfg.transmitters();
  ConicProgram p;
  const int tau = p.add_variable();
  p.set_objective(tau, 1.0);
  const std::vector<ComplexVar> bv = add_precoders(cfg, p);
  const int nvar = p.var_count;

  std::vector<CMatrix> fh;
  for (int j = 0; j < n; ++j) fh.push_back(f * tx_channel(cfg, ch, j));

  SourceStep out;
  for (int k = 0; k < cfg.receivers(); ++k) {
    const int d = desired_transmitter(cfg, k);
    const int self = self_transmitter(cfg, k);
    const CMatrix u = w[k].adjoint() * rx_channel(cfg, ch, k) * f;
    const double theta = cfg.sigma2_r * u.squaredNorm() + cfg.sigma2_d * w[k].squaredNorm() + cfg.rx_streams(k);
    const Eigen::Index nb = u.rows();
    Eigen::Index len = 0;
    for (int j = 0; j < n; ++j)
      if (j != self) len += nb * cfg.streams(j);
    CAffine v(len, nvar);
    Eigen::Index off = 0;
    CMatrix ht_d;
    for (int j = 0; j < n; ++j) {
      if (j == self) continue;
      const CMatrix ht = u * tx_channel(cfg, ch, j);
      add_left_product(v, off, ht, bv[j]);
      off += nb * cfg.streams(j);
      if (j == d) ht_d = ht;
    }
    AffineScalar lin(-theta);
    lin.add(tau, 1.0);
    add_trace_term(lin, ht_d, bv[d], 2.0);
    if (opt.formulation == Formulation::Cone) {
      p.socs.push_back(rotated_cone(v, lin));
    } else {
      HermitianAffineMatrix lmi(static_cast<int>(len) + 1);
      lmi.constant()(0, 0) = lin.constant;
      lmi.constant().block(1, 1, len, len) = CMatrix::Identity(len, len);
      for (int var = 0; var < nvar; ++var) {
        double lc = 0.0;
        for (const auto& t : lin.terms)
          if (t.var == var) lc += t.coef;
        const CVector col = v.m.col(var);
        if (lc == 0.0 && col.squaredNorm() == 0.0) continue;
        CMatrix e = CMatrix::Zero(len + 1, len + 1);
        e(0, 0) = lc;
        lmi.add_term(var, e);
        if (col.squaredNorm() != 0.0) lmi.add_block_pair(var, 1, 0, col);
      }
      p.add_hermitian_psd(lmi);
    }
  }

  // relay budget: sum_j ||F H_j B_j||^2 <= P_r - sigma_r^2 tr(F F^H)
  Eigen::Index len = 0;
  for (int j = 0; j < n; ++j) len += cfg.n_r * cfg.streams(j);
  CAffine relay(len, nvar);
  Eigen::Index off = 0;
  for (int j = 0; j < n; ++j) {
    add_left_product(relay, off, fh[j], bv[j]);
    off += cfg.n_r * cfg.streams(j);
  }
  auto add_ball = [&](const CAffine& v, double radius2) {
    if (opt.formulation == Formulation::Cone) {
      p.socs.push_back(norm_cone(v, std::sqrt(radius2)));
      return;
    }
    const Eigen::Index m = v.c0.size();
    HermitianAffineMatrix lmi(static_cast<int>(m) + 1);
    lmi.constant()(0, 0) = radius2;
    lmi.constant().block(1, 1, m, m) = CMatrix::Identity(m, m);
    for (int var = 0; var < nvar; ++var) {
      const CVector col = v.m.col(var);
      if (col.squaredNorm() != 0.0) lmi.add_block_pair(var, 1, 0, col);
    }
    p.add_hermitian_psd(lmi);
  };
  add_ball(relay, budget);
  for (int j = 0; j < n; ++j) {
    if (bv[j].fixed()) continue;
    CAffine v(bv[j].rows * bv[j].cols, nvar);
    add_left_product(v, 0, CMatrix::Identity(bv[j].rows, bv[j].rows), bv[j]);
    add_ball(v, cfg.p_s[j]);
  }

  const conic::ConicSolution sol = run_program("source", p, opt, out.stats);
  for (int j = 0; j < n; ++j) out.b.push_back(bv[j].value(sol.primal_values));
  fit_source_budgets(cfg, ch, f, out.b);
  out.tau = sol.primal_values(tau);
  return out;
}

TransceiverDesign initial_design(const SystemConfig& cfg, const ChannelRealization& ch,
                                 std::optional<std::uint64_t> jitter_seed) {
  cfg.validate();
  TransceiverDesign d;
  d.b = initial_precoders(cfg);
  d.f = CMatrix::Identity(cfg.n_r, cfg.n_r);
  if (jitter_seed) {
    std::mt19937_64 rng(*jitter_seed);
    std::normal_distribution<double> nd(0.0, 0.1);
    auto jitter = [&](CMatrix& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          const double re = nd(rng);
          const double im = nd(rng);
          m(i, j) += cplx(re, im);
        }
    };
    for (int j = 0; j < cfg.transmitters(); ++j) {
      CMatrix m = CMatrix::Identity(cfg.tx_antennas(j), cfg.streams(j));
      jitter(m);
      d.b[j] = std::sqrt(cfg.p_s[j]) * m / m.norm();
    }
    jitter(d.f);
  }
  const CMatrix psi = received_covariance(cfg, ch, d.b);
  d.f *= std::sqrt(cfg.p_r / relay_power(d.f, psi));
  d.w = mmse_receivers(cfg, ch, d.b, d.f);
  return d;
}

IterateResult iterate_minmax(const SystemConfig& cfg, const ChannelRealization& ch, const TransceiverDesign& init,
                             const IterateOptions& opt) {
  cfg.validate();
  check_feasible(cfg, ch, init);
  IterateResult res;
  TransceiverDesign& d = res.design;
  d = init;
  d.w = mmse_receivers(cfg, ch, d.b, d.f);
  double prev = worst_mse(cfg, ch, d);
  res.trace.initial_objective = prev;
  for (int it = 0; it < opt.max_iters; ++it) {
    PassStats ps;
    d.w = mmse_receivers(cfg, ch, d.b, d.f);
    double cur = worst_mse(cfg, ch, d);

    RelayStep rs;
    SourceStep ss;
    try {
      rs = relay_subproblem(cfg, ch, d.b, d.w, opt.sub);
    } catch (const Error& e) {
      res.trace.failure = e.what();
      break;
    }
    ps.relay = rs.stats;
    {
      TransceiverDesign cand = d;
      cand.f = rs.f;
      const double e = worst_mse(cfg, ch, cand);
      ps.relay_accepted = e <= cur;
      if (ps.relay_accepted) {
        d = std::move(cand);
        cur = e;
      }
    }

    if (cfg.p_r - cfg.sigma2_r * d.f.squaredNorm() > 0.0) {
      try {
        ss = source_subproblem(cfg, ch, d.f, d.w, opt.sub);
      } catch (const Error& e) {
        res.trace.failure = e.what();
        break;
      }
      ps.source = ss.stats;
      TransceiverDesign cand = d;
      cand.b = ss.b;
      const double e = worst_mse(cfg, ch, cand);
      ps.source_accepted = e <= cur;
      if (ps.source_accepted) {
        d = std::move(cand);
        cur = e;
      }
    } else {
      ps.source_accepted = false;
    }

    res.trace.objective_per_iter.push_back(cur);
    res.trace.subproblem_stats.push_back(ps);
    res.trace.iters = it + 1;
    if (std::abs(prev - cur) < opt.tol) {
      res.trace.converged = true;
      break;
    }
    prev = cur;
  }
  d.w = mmse_receivers(cfg, ch, d.b, d.f);
  return res;
}

std::vector<CMatrix> first_hop_filters(const SystemConfig& cfg, const ChannelRealization& ch,
                                       const std::vector<CMatrix>& b) {
  const CMatrix psi = received_covariance(cfg, ch, b);
  std::vector<CMatrix> d;
  for (int j = 0; j < cfg.transmitters(); ++j) d.push_back(linalg::solve_hpd(psi, tx_channel(cfg, ch, j) * b[j]));
  return d;
}

double first_hop_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                     const std::vector<CMatrix>& d, int j) {
  const CMatrix psi = received_covariance(cfg, ch, b);
  const CMatrix& dj = d.at(j);
  if (dj.rows() != cfg.n_r || dj.cols() != cfg.streams(j))
    throw Error(ErrorCode::DimensionMismatch, "first-hop filter shape differs from configuration");
  const CMatrix cross = dj.adjoint() * tx_channel(cfg, ch, j) * b[j];
  return (dj.adjoint() * psi * dj).trace().real() - 2.0 * cross.trace().real() + cfg.streams(j);
}

SourceStep source_socp(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& d,
                       const SubproblemOptions& opt) {
  cfg.validate();
  const int n = cfg.transmitters();
  if (static_cast<int>(d.size()) != n) throw Error(ErrorCode::DimensionMismatch, "one filter per transmitter required");
  ConicProgram p;
  const int t = p.add_variable();
  p.set_objective(t, 1.0);
  const std::vector<ComplexVar> bv = add_precoders(cfg, p);
  const int nvar = p.var_count;
  for (int j = 0; j < n; ++j) {
    const Eigen::Index nb = cfg.streams(j);
    Eigen::Index len = 0;
    for (int i = 0; i < n; ++i) len += nb * cfg.streams(i);
    // [sigma_r ||D_j||; vec(D_j^H H_i B_i) - delta_ij vec(I)]
    CAffine v(len + 1, nvar);
    v.c0(0) = std::sqrt(cfg.sigma2_r) * d[j].norm();
    Eigen::Index off = 1;
    for (int i = 0; i < n; ++i) {
      add_left_product(v, off, d[j].adjoint() * tx_channel(cfg, ch, i), bv[i]);
      if (i == j)
        for (Eigen::Index a = 0; a < nb; ++a) v.c0(off + a + nb * a) -= 1.0;
      off += nb * cfg.streams(i);
    }
    SocConstraint s;
    push_real_rows(v, s.v);
    s.t.add(t, 1.0);
    p.socs.push_back(std::move(s));
  }
  for (int j = 0; j < n; ++j) {
    if (bv[j].fixed()) continue;
    CAffine v(bv[j].rows * bv[j].cols, nvar);
    add_left_product(v, 0, CMatrix::Identity(bv[j].rows, bv[j].rows), bv[j]);
    p.socs.push_back(norm_cone(v, std::sqrt(cfg.p_s[j])));
  }
  SourceStep out;
  const conic::ConicSolution sol = run_program("first-hop", p, opt, out.stats);
  for (int j = 0; j < n; ++j) {
    out.b.push_back(bv[j].value(sol.primal_values));
    const double pw = out.b[j].squaredNorm();
    if (pw > cfg.p_s[j]) out.b[j] *= std::sqrt(cfg.p_s[j] / pw);
  }
  const double tv = sol.primal_values(t);
  out.tau = tv * tv;
  return out;
}

QSdpResult relay_q_sdp(const SystemConfig& cfg, const ChannelRealization& ch, const SubproblemOptions& opt) {
  cfg.validate();
  const int nr = cfg.n_r;
  ConicProgram p;
  const int t = p.add_variable();
  p.set_objective(t, 1.0);
  const HermVar q = add_hermitian(p, nr);
  std::vector<HermVar> ys;
  for (int k = 0; k < cfg.receivers(); ++k) ys.push_back(add_hermitian(p, cfg.rx_antennas(k)));

  std::vector<CMatrix> qb;
  for (int s = 0; s < q.count(); ++s) qb.push_back(q.basis(s));

  for (int k = 0; k < cfg.receivers(); ++k) {
    const int m = cfg.rx_antennas(k);
    const CMatrix r = rx_channel(cfg, ch, k);
    HermitianAffineMatrix lmi(2 * m);
    lmi.constant().block(0, m, m, m) = CMatrix::Identity(m, m);
    lmi.constant().block(m, 0, m, m) = CMatrix::Identity(m, m);
    lmi.constant().block(m, m, m, m) = CMatrix::Identity(m, m);
    AffineScalar epi(-static_cast<double>(cfg.rx_streams(k) - m));
    epi.add(t, 1.0);
    for (int s = 0; s < ys[k].count(); ++s) {
      CMatrix e = CMatrix::Zero(2 * m, 2 * m);
      e.block(0, 0, m, m) = ys[k].basis(s);
      lmi.add_term(ys[k].var(s), e);
      if (ys[k].diagonal(s)) epi.add(ys[k].var(s), -1.0);
    }
    for (int s = 0; s < q.count(); ++s) {
      CMatrix e = CMatrix::Zero(2 * m, 2 * m);
      e.block(m, m, m, m) = linalg::hermitian_part(r * qb[s] * r.adjoint() / cfg.sigma2_d);
      lmi.add_term(q.var(s), e);
    }
    p.nonneg.push_back(epi);
    p.add_hermitian_psd(lmi);
  }
  AffineScalar budget(cfg.p_r);
  for (int s = 0; s < nr; ++s) budget.add(q.var(s), -1.0);
  p.nonneg.push_back(budget);
  p.nonneg.push_back(AffineScalar().add(t, 1.0));
  HermitianAffineMatrix qpsd(nr);
  for (int s = 0; s < q.count(); ++s) qpsd.add_term(q.var(s), qb[s]);
  p.add_hermitian_psd(qpsd);

  QSdpResult out;
  const conic::ConicSolution sol = run_program("relay-q", p, opt, out.stats);
  out.q = linalg::hermitian_part(q.value(sol.primal_values));
  for (const auto& y : ys) out.y.push_back(linalg::hermitian_part(y.value(sol.primal_values)));
  out.objective = sol.primal_values(t);
  return out;
}

CMatrix relay_shaping_factor(const SystemConfig& cfg, const CMatrix& q) {
  const int width = cfg.total_streams();
  if (q.rows() != cfg.n_r || q.cols() != cfg.n_r) throw Error(ErrorCode::DimensionMismatch, "Q must be n_r x n_r");
  const linalg::HermitianEVD evd = linalg::hermitian_evd(linalg::hermitian_part(q));
  CMatrix t = CMatrix::Zero(cfg.n_r, width);
  for (int i = 0; i < std::min(width, cfg.n_r); ++i) {
    const double lam = evd.eigenvalues(i);
    if (lam > 0.0) t.col(i) = std::sqrt(lam) * evd.eigenvectors.col(i);
  }
  return t;
}

CMatrix assemble_from_factor(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                             const std::vector<CMatrix>& d, const CMatrix& t) {
  if (t.rows() != cfg.n_r || t.cols() != cfg.total_streams())
    throw Error(ErrorCode::DimensionMismatch, "T must be n_r x total streams");
  CMatrix dstack(cfg.n_r, cfg.total_streams());
  Eigen::Index off = 0;
  for (int j = 0; j < cfg.transmitters(); ++j) {
    dstack.middleCols(off, cfg.streams(j)) = d.at(j);
    off += cfg.streams(j);
  }
  CMatrix f = t * dstack.adjoint();
  fit_relay_budget(cfg, received_covariance(cfg, ch, b), f);
  return f;
}

CMatrix assemble_relay_matrix(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                              const std::vector<CMatrix>& d, const CMatrix& q) {
  return assemble_from_factor(cfg, ch, b, d, relay_shaping_factor(cfg, q));
}

CMatrix steered_factor(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& v,
                       double lambda) {
  const int nr = cfg.n_r;
  CMatrix acc = lambda * CMatrix::Identity(nr, nr);
  std::vector<CMatrix> g(cfg.receivers());
  for (int k = 0; k < cfg.receivers(); ++k) {
    g[k] = rx_channel(cfg, ch, k).adjoint() * v.at(k);
    acc += g[k] * g[k].adjoint();
  }
  const Eigen::LDLT<CMatrix> ldlt(linalg::hermitian_part(acc));
  CMatrix t(nr, cfg.total_streams());
  Eigen::Index off = 0;
  for (int j = 0; j < cfg.transmitters(); ++j) {
    int k = 0;
    while (desired_transmitter(cfg, k) != j) ++k;
    if (g[k].cols() != cfg.streams(j)) throw Error(ErrorCode::DimensionMismatch, "filter width differs from stream count");
    t.middleCols(off, cfg.streams(j)) = ldlt.solve(g[k]);
    off += cfg.streams(j);
  }
  return t;
}

const char* to_string(RelayRecovery r) {
  switch (r) {
    case RelayRecovery::EigenFactor: return "eigen-factor";
    case RelayRecovery::AlignedFactor: return "aligned-factor";
    case RelayRecovery::Structured: return "structured";
    case RelayRecovery::Best: return "best";
  }
  return "?";
}

namespace {

CMatrix scale_to_budget(const SystemConfig& cfg, const CMatrix& psi, CMatrix f) {
  const double pw = relay_power(f, psi);
  if (pw > 0.0) f *= std::sqrt(cfg.p_r / pw);
  return f;
}

// Dominant receive directions of each relay-to-receiver channel.
std::vector<CMatrix> dominant_modes(const SystemConfig& cfg, const ChannelRealization& ch) {
  std::vector<CMatrix> v;
  for (int k = 0; k < cfg.receivers(); ++k) {
    const CMatrix r = rx_channel(cfg, ch, k);
    const linalg::HermitianEVD evd = linalg::hermitian_evd(linalg::hermitian_part(r * r.adjoint()));
    v.push_back(evd.eigenvectors.leftCols(cfg.rx_streams(k)));
  }
  return v;
}

double regularizer(const SystemConfig& cfg, const std::vector<CMatrix>& v) {
  double s = 0.0;
  for (const auto& x : v) s += x.squaredNorm();
  return cfg.p_r > 0.0 ? cfg.sigma2_d * s / cfg.p_r : 1.0;
}

}  // namespace

SimplifiedDesignOutput simplified_design(const SystemConfig& cfg, const ChannelRealization& ch,
                                         const SimplifiedOptions& opt) {
  cfg.validate();
  for (int j = 1; j < cfg.transmitters(); ++j)
    if (cfg.streams(j) != cfg.streams(0))
      throw Error(ErrorCode::InvalidArgument, "the decomposition design needs equal stream counts");
  const int n = cfg.transmitters();
  SimplifiedDesignOutput out;
  std::vector<CMatrix> b = initial_precoders(cfg);
  std::vector<CMatrix> d = first_hop_filters(cfg, ch, b);
  auto worst_first_hop = [&](const std::vector<CMatrix>& bb, const std::vector<CMatrix>& dd) {
    double e = 0.0;
    for (int j = 0; j < n; ++j) e = std::max(e, first_hop_mse(cfg, ch, bb, dd, j));
    return e;
  };
  double es = worst_first_hop(b, d);
  for (int it = 0; it < opt.inner_max; ++it) {
    const SourceStep st = source_socp(cfg, ch, d, opt.sub);
    out.stats.push_back(st.stats);
    const std::vector<CMatrix> dn = first_hop_filters(cfg, ch, st.b);
    const double en = worst_first_hop(st.b, dn);
    out.inner_iterations = it + 1;
    if (en > es) break;
    const double delta = es - en;
    b = st.b;
    d = dn;
    es = en;
    if (delta < opt.inner_tol) break;
  }
  const QSdpResult qs = relay_q_sdp(cfg, ch, opt.sub);
  out.stats.push_back(qs.stats);
  out.q = qs.q;
  out.t_tilde = relay_shaping_factor(cfg, qs.q);
  out.d_filters = d;
  for (int j = 0; j < n; ++j) out.first_hop_mse.push_back(first_hop_mse(cfg, ch, b, d, j));
  for (int k = 0; k < cfg.receivers(); ++k) {
    const int m = cfg.rx_antennas(k);
    const CMatrix r = rx_channel(cfg, ch, k);
    const CMatrix a = CMatrix::Identity(m, m) + r * qs.q * r.adjoint() / cfg.sigma2_d;
    out.second_hop_mse.push_back(linalg::inverse_hpd(a).trace().real() + cfg.rx_streams(k) - m);
  }
  out.design.b = b;
  const CMatrix psi_b = received_covariance(cfg, ch, b);
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](RelayRecovery kind, const CMatrix& f) {
    TransceiverDesign cand{b, f, mmse_receivers(cfg, ch, b, f)};
    const double e = worst_mse(cfg, ch, cand);
    if (e < best) {
      best = e;
      out.design = std::move(cand);
      out.recovery_used = kind;
    }
  };
  const bool all = opt.recovery == RelayRecovery::Best;
  if (all || opt.recovery == RelayRecovery::EigenFactor) consider(RelayRecovery::EigenFactor, assemble_from_factor(cfg, ch, b, d, out.t_tilde));
  if (all || opt.recovery == RelayRecovery::AlignedFactor) {
    const std::vector<CMatrix> modes = dominant_modes(cfg, ch);
    const CMatrix target = steered_factor(cfg, ch, modes, regularizer(cfg, modes));
    Eigen::JacobiSVD<CMatrix> svd(out.t_tilde.adjoint() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const CMatrix v = svd.matrixU() * svd.matrixV().adjoint();
    consider(RelayRecovery::AlignedFactor, scale_to_budget(cfg, psi_b, assemble_from_factor(cfg, ch, b, d, out.t_tilde * v)));
  }
  if (all || opt.recovery == RelayRecovery::Structured) {
    std::vector<CMatrix> v = dominant_modes(cfg, ch);
    for (int r = 0; r <= opt.refine_rounds; ++r) {
      const CMatrix f = scale_to_budget(cfg, psi_b, assemble_from_factor(cfg, ch, b, d, steered_factor(cfg, ch, v, regularizer(cfg, v))));
      consider(RelayRecovery::Structured, f);
      v = mmse_receivers(cfg, ch, b, f);
    }
  }
  const CMatrix psi = received_covariance(cfg, ch, b);
  const double signal = psi.trace().real() - cfg.sigma2_r * cfg.n_r;
  out.first_hop_snr_db = signal > 0.0 ? 10.0 * std::log10(signal / (cfg.sigma2_r * cfg.n_r))
                                      : -std::numeric_limits<double>::infinity();
  return out;
}

CMatrix first_hop_gram(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b, int k,
                       bool pseudo) {
  const int des = desired_transmitter(cfg, k);
  const CMatrix hb = tx_channel(cfg, ch, des) * b.at(des);
  const CMatrix psi = effective_covariance(cfg, ch, b, k);
  const CMatrix x = pseudo ? linalg::pinv_solve_psd(psi, hb) : linalg::solve_hpd(psi, hb);
  return linalg::hermitian_part(hb.adjoint() * x);
}

CMatrix structured_relay(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                         const CMatrix& t_tilde, int k) {
  const int des = desired_transmitter(cfg, k);
  const CMatrix hb = tx_channel(cfg, ch, des) * b.at(des);
  if (t_tilde.rows() != cfg.n_r || t_tilde.cols() != hb.cols())
    throw Error(ErrorCode::DimensionMismatch, "T must be n_r x streams");
  const CMatrix psi = effective_covariance(cfg, ch, b, k);
  return t_tilde * linalg::solve_hpd(psi, hb).adjoint();
}

double mmse_form_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                     const CMatrix& f, int k) {
  TransceiverDesign d{b, f, {}};
  const EquivalentChannel eq = equivalent_channel(cfg, ch, d, k);
  const Eigen::Index nb = eq.h_bar.cols();
  const CMatrix a = CMatrix::Identity(nb, nb) + eq.h_bar.adjoint() * linalg::solve_hpd(eq.c_bar, eq.h_bar);
  return linalg::inverse_hpd(linalg::hermitian_part(a)).trace().real();
}

double decomposed_mse(const SystemConfig& cfg, const ChannelRealization& ch, const std::vector<CMatrix>& b,
                      const CMatrix& t_tilde, int k) {
  const int des = desired_transmitter(cfg, k);
  const CMatrix hb = tx_channel(cfg, ch, des) * b.at(des);
  const Eigen::Index nb = hb.cols();
  const CMatrix psi = effective_covariance(cfg, ch, b, k);
  const CMatrix psi_bar = linalg::hermitian_part(psi - hb * hb.adjoint());
  const CMatrix id = CMatrix::Identity(nb, nb);
  const double first =
      linalg::inverse_hpd(linalg::hermitian_part(id + hb.adjoint() * linalg::solve_hpd(psi_bar, hb))).trace().real();
  const CMatrix gram = linalg::hermitian_part(hb.adjoint() * linalg::solve_hpd(psi, hb));
  const CMatrix r = rx_channel(cfg, ch, k);
  const CMatrix rt = r * t_tilde;
  const CMatrix inner = linalg::inverse_hpd(gram) + rt.adjoint() * rt / cfg.sigma2_d;
  return first + linalg::inverse_hpd(linalg::hermitian_part(inner)).trace().real();
}

}  // namespace relaynet
