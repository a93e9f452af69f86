#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "relaynet/oneway.hpp"

using namespace relaynet;

namespace {

ChannelRealization scalar_channel(double h, double g) {
  ChannelRealization ch;
  ch.h = {CMatrix::Constant(1, 1, h)};
  ch.g = {CMatrix::Constant(1, 1, g)};
  return ch;
}

SystemConfig scalar_config(double p_s, double p_r) {
  return SystemConfig::uniform(Mode::OneWay, 1, 1, 1, 1, 1, 10.0 * std::log10(p_s), 10.0 * std::log10(p_r));
}

// Scalar link MSE |w g f h b - 1|^2 + |w|^2 (sr |g f|^2 + sd).
double scalar_mse(double h, double g, double b, double f, double w, double sr = 1.0, double sd = 1.0) {
  const double e = w * g * f * h * b - 1.0;
  return e * e + w * w * (sr * g * g * f * f + sd);
}

std::vector<double> real_params(const CMatrix& w) {
  std::vector<double> x;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    x.push_back(w(i).real());
    x.push_back(w(i).imag());
  }
  return x;
}

// Central-difference gradient of E_k with respect to the real and imaginary
// parts of W_k.
std::vector<double> fd_gradient(const SystemConfig& cfg, const ChannelRealization& ch, TransceiverDesign d, int k,
                                double eps = 1e-6) {
  std::vector<double> grad;
  for (Eigen::Index i = 0; i < d.w[k].size(); ++i)
    for (int part = 0; part < 2; ++part) {
      const cplx step = part ? cplx(0.0, eps) : cplx(eps, 0.0);
      d.w[k](i) += step;
      const double up = link_mse(cfg, ch, d, k).value;
      d.w[k](i) -= 2.0 * step;
      const double down = link_mse(cfg, ch, d, k).value;
      d.w[k](i) += step;
      grad.push_back((up - down) / (2.0 * eps));
    }
  return grad;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

SubproblemOptions lmi_options() {
  SubproblemOptions o;
  o.formulation = Formulation::Lmi;
  return o;
}

}  // namespace

TEST_CASE("MMSE receivers: scalar value, zero relay, stationarity") {
  const SystemConfig sc = scalar_config(1.0, 1.0);
  const ChannelRealization s1 = scalar_channel(1.0, 1.0);
  const std::vector<CMatrix> w = mmse_receivers(sc, s1, {CMatrix::Constant(1, 1, 1.0)}, CMatrix::Constant(1, 1, 1.0));
  CHECK(w[0](0, 0).real() == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(w[0](0, 0).imag()) < 1e-15);

  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 3, 2, 6, 3, 2, 10, 10);
  const ChannelRealization ch = generate_channels(cfg, 3);
  std::mt19937_64 rng(4);
  TransceiverDesign d = oracle::random_design(cfg, rng);
  for (const CMatrix& wk : mmse_receivers(cfg, ch, d.b, CMatrix::Zero(6, 6))) CHECK(wk.norm() == 0.0);

  d.w = mmse_receivers(cfg, ch, d.b, d.f);
  for (int k = 0; k < 3; ++k) {
    const double g0 = norm(fd_gradient(cfg, ch, d, k));
    TransceiverDesign moved = d;
    moved.w[k] += 0.1 * d.w[k].norm() * oracle::random_cmatrix(rng, 3, 2) / std::sqrt(6.0);
    const double g1 = norm(fd_gradient(cfg, ch, moved, k));
    CHECK(g0 <= 1e-6 * g1);
    const std::vector<double> base = real_params(d.w[k]);
    CHECK(base.size() == 12);
    for (int dir = 0; dir < 20; ++dir) {
      const CMatrix delta = oracle::random_cmatrix(rng, 3, 2);
      const double h = 1e-5;
      TransceiverDesign up = d, down = d;
      up.w[k] += h * delta;
      down.w[k] -= h * delta;
      const double dd = (link_mse(cfg, ch, up, k).value - link_mse(cfg, ch, down, k).value) / (2.0 * h);
      CHECK(std::abs(dd) <= 1e-6);
    }
  }
}

TEST_CASE("relay subproblem: scalar grid oracle and power dependence") {
  const double h = 0.9, g = 1.3, b = 1.5, w = 0.4;
  std::vector<double> taus;
  for (double p_r : {0.5, 2.0, 8.0, 32.0, 1e4}) {
    const SystemConfig cfg = scalar_config(b * b, p_r);
    const ChannelRealization ch = scalar_channel(h, g);
    const RelayStep st = relay_subproblem(cfg, ch, {CMatrix::Constant(1, 1, b)}, {CMatrix::Constant(1, 1, w)});
    CHECK(st.stats.status == conic::SolveStatus::Optimal);
    const double fmax = std::sqrt(p_r / (h * h * b * b + 1.0));
    double best = 1e300;
    for (int i = 0; i <= 10000; ++i) best = std::min(best, scalar_mse(h, g, b, -fmax + 2.0 * fmax * i / 10000.0, w));
    const TransceiverDesign d{{CMatrix::Constant(1, 1, b)}, st.f, {CMatrix::Constant(1, 1, w)}};
    const double e = mse_oneway(cfg, ch, d, 0).value;
    CHECK(e == doctest::Approx(st.tau).epsilon(1e-6));
    CHECK(e <= best + 1e-7);
    CHECK(e >= best - 1e-4 * fmax * fmax);
    CHECK(relay_power(st.f, received_covariance(cfg, ch, d.b)) <= p_r + 1e-6);
    taus.push_back(st.tau);
  }
  for (std::size_t i = 1; i < taus.size(); ++i) CHECK(taus[i] <= taus[i - 1] + 1e-9);
  // Unconstrained minimum over f of the scalar quadratic.
  const double a = w * g * h * b, c = w * w * g * g;
  const double fopt = a / (a * a + c);
  CHECK(taus.back() == doctest::Approx(scalar_mse(h, g, b, fopt, w)).epsilon(1e-6));
}

TEST_CASE("relay subproblem: zero precoders, monotone step, formulations agree") {
  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 10, 10);
  const ChannelRealization ch = generate_channels(cfg, 7);
  std::mt19937_64 rng(8);
  TransceiverDesign d = oracle::random_design(cfg, rng, 0.05);
  d.w = mmse_receivers(cfg, ch, d.b, d.f);

  std::vector<CMatrix> zero_b = {CMatrix::Zero(2, 2), CMatrix::Zero(2, 2)};
  const RelayStep z = relay_subproblem(cfg, ch, zero_b, d.w);
  CHECK(relay_power(z.f, received_covariance(cfg, ch, zero_b)) <= 1e-6);

  const double before = worst_mse(cfg, ch, d);
  const RelayStep cone = relay_subproblem(cfg, ch, d.b, d.w);
  const RelayStep lmi = relay_subproblem(cfg, ch, d.b, d.w, lmi_options());
  TransceiverDesign after = d;
  after.f = cone.f;
  CHECK(worst_mse(cfg, ch, after) <= before + 1e-7);
  CHECK(worst_mse(cfg, ch, after) == doctest::Approx(cone.tau).epsilon(1e-6));
  CHECK(cone.tau == doctest::Approx(lmi.tau).epsilon(1e-6));
  CHECK(relay_power(cone.f, received_covariance(cfg, ch, d.b)) <= cfg.p_r + 1e-6);
  CHECK(relay_power(lmi.f, received_covariance(cfg, ch, d.b)) <= cfg.p_r + 1e-6);
}

TEST_CASE("source subproblem: scalar grid oracle, zero relay floor, infeasible budget") {
  const double h = 0.7, g = 1.1, f = 0.8, w = 0.6, p_s = 4.0, p_r = 2.0;
  const SystemConfig cfg = scalar_config(p_s, p_r);
  const ChannelRealization ch = scalar_channel(h, g);
  const SourceStep st = source_subproblem(cfg, ch, CMatrix::Constant(1, 1, f), {CMatrix::Constant(1, 1, w)});
  const double bmax = std::min(std::sqrt(p_s), std::sqrt((p_r / (f * f) - 1.0) / (h * h)));
  double best = 1e300;
  for (int i = 0; i <= 10000; ++i) best = std::min(best, scalar_mse(h, g, -bmax + 2.0 * bmax * i / 10000.0, f, w));
  const TransceiverDesign d{st.b, CMatrix::Constant(1, 1, f), {CMatrix::Constant(1, 1, w)}};
  const double e = mse_oneway(cfg, ch, d, 0).value;
  CHECK(e == doctest::Approx(st.tau).epsilon(1e-6));
  CHECK(e <= best + 1e-7);
  CHECK(e >= best - 1e-4 * bmax * bmax);
  CHECK_NOTHROW(check_feasible(cfg, ch, d));

  const SystemConfig c2 = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 10, 10);
  const ChannelRealization ch2 = generate_channels(c2, 17);
  std::mt19937_64 rng(18);
  TransceiverDesign r = oracle::random_design(c2, rng);
  const SourceStep floor = source_subproblem(c2, ch2, CMatrix::Zero(4, 4), r.w);
  double expect = 0.0;
  for (int k = 0; k < 2; ++k) expect = std::max(expect, 2.0 + c2.sigma2_d * r.w[k].squaredNorm());
  TransceiverDesign fz{floor.b, CMatrix::Zero(4, 4), r.w};
  CHECK(worst_mse(c2, ch2, fz) == doctest::Approx(expect).epsilon(1e-7));
  for (int j = 0; j < 2; ++j) CHECK(floor.b[j].squaredNorm() <= c2.p_s[j] + 1e-6);

  const double too_much = std::sqrt(c2.p_r / (c2.sigma2_r * 4.0)) * 1.01;
  try {
    source_subproblem(c2, ch2, too_much * CMatrix::Identity(4, 4), r.w);
    FAIL("expected an infeasible relay budget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
}

TEST_CASE("source subproblem: monotone step and formulations agree") {
  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 10, 10);
  const ChannelRealization ch = generate_channels(cfg, 27);
  TransceiverDesign d = initial_design(cfg, ch);
  const double before = worst_mse(cfg, ch, d);
  const SourceStep cone = source_subproblem(cfg, ch, d.f, d.w);
  const SourceStep lmi = source_subproblem(cfg, ch, d.f, d.w, lmi_options());
  CHECK(cone.tau == doctest::Approx(lmi.tau).epsilon(1e-6));
  d.b = cone.b;
  CHECK(worst_mse(cfg, ch, d) <= before + 1e-7);
  CHECK_NOTHROW(check_feasible(cfg, ch, d));
}

TEST_CASE("iterate_minmax: monotone trace, feasibility, fixed-point re-entry") {
  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 15, 15);
  for (std::uint64_t seed : {1u, 2u}) {
    const ChannelRealization ch = generate_channels(cfg, seed);
    const TransceiverDesign init = initial_design(cfg, ch);
    CHECK_NOTHROW(check_feasible(cfg, ch, init));
    const IterateResult r = iterate_minmax(cfg, ch, init);
    CHECK(r.trace.failure.empty());
    CHECK(r.trace.iters == static_cast<int>(r.trace.objective_per_iter.size()));
    double prev = r.trace.initial_objective;
    for (double v : r.trace.objective_per_iter) {
      CHECK(v <= prev + 1e-8);
      prev = v;
    }
    CHECK(worst_mse(cfg, ch, r.design) <= r.trace.objective_per_iter.back() + 1e-12);
    CHECK_NOTHROW(check_feasible(cfg, ch, r.design));
    if (r.trace.converged) {
      const IterateResult again = iterate_minmax(cfg, ch, r.design);
      CHECK(again.trace.iters == 1);
      CHECK(again.trace.converged);
      CHECK(std::abs(again.trace.objective_per_iter[0] - again.trace.initial_objective) <= 1e-3);
    }
  }
  const ChannelRealization ch = generate_channels(cfg, 3);
  const TransceiverDesign j1 = initial_design(cfg, ch, 5), j2 = initial_design(cfg, ch, 5);
  CHECK(j1.f == j2.f);
  CHECK(j1.f != initial_design(cfg, ch).f);
  CHECK_NOTHROW(check_feasible(cfg, ch, j1));
}

TEST_CASE("first-hop filters and first-hop MSE") {
  SystemConfig c1 = SystemConfig::uniform(Mode::OneWay, 1, 2, 2, 2, 2, 0, 0);
  ChannelRealization i2;
  i2.h = {CMatrix::Identity(2, 2)};
  i2.g = {CMatrix::Identity(2, 2)};
  const std::vector<CMatrix> d = first_hop_filters(c1, i2, {CMatrix::Identity(2, 2)});
  CHECK((d[0] - 0.5 * CMatrix::Identity(2, 2)).norm() < 1e-15);
  const std::vector<CMatrix> zb = {CMatrix::Zero(2, 2)};
  CHECK(first_hop_filters(c1, i2, zb)[0].norm() == 0.0);
  CHECK(first_hop_mse(c1, i2, zb, first_hop_filters(c1, i2, zb), 0) == doctest::Approx(2.0));

  const double h = 1.4, b = 0.7;
  const SystemConfig sc = scalar_config(b * b, 1.0);
  const ChannelRealization s1 = scalar_channel(h, 1.0);
  const std::vector<CMatrix> bs = {CMatrix::Constant(1, 1, b)};
  CHECK(first_hop_mse(sc, s1, bs, first_hop_filters(sc, s1, bs), 0) ==
        doctest::Approx(1.0 - h * h * b * b / (h * h * b * b + 1.0)).epsilon(1e-12));

  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 3, 2, 6, 3, 2, 10, 10, 0.8, 1.0);
  const ChannelRealization ch = generate_channels(cfg, 5);
  std::mt19937_64 rng(6);
  const TransceiverDesign rd = oracle::random_design(cfg, rng);
  const std::vector<CMatrix> dd = first_hop_filters(cfg, ch, rd.b);
  for (int k = 0; k < 3; ++k) {
    const double at = first_hop_mse(cfg, ch, rd.b, dd, k);
    const CMatrix hb = ch.h[k] * rd.b[k];
    const CMatrix psib = excluded_covariance(cfg, ch, rd.b, k);
    const double direct =
        linalg::inverse_hpd(CMatrix::Identity(2, 2) + hb.adjoint() * linalg::solve_hpd(psib, hb)).trace().real();
    CHECK(at == doctest::Approx(direct).epsilon(1e-9));
    for (int p = 0; p < 50; ++p) {
      std::vector<CMatrix> pert = dd;
      pert[k] += 0.05 * oracle::random_cmatrix(rng, 6, 2) * dd[k].norm();
      CHECK(first_hop_mse(cfg, ch, rd.b, pert, k) >= at - 1e-12);
    }
  }
}

TEST_CASE("source SOCP: scalar grid oracle, zero filters, monotone alternation") {
  const double h = 1.2, dval = 0.5, p_s = 3.0;
  const SystemConfig sc = scalar_config(p_s, 1.0);
  const ChannelRealization s1 = scalar_channel(h, 1.0);
  const SourceStep st = source_socp(sc, s1, {CMatrix::Constant(1, 1, dval)});
  double best = 1e300;
  for (int i = 0; i <= 10000; ++i) {
    const double bb = -std::sqrt(p_s) + 2.0 * std::sqrt(p_s) * i / 10000.0;
    const double e = dval * dval * (h * h * bb * bb + 1.0) - 2.0 * dval * h * bb + 1.0;
    best = std::min(best, e);
  }
  const double got = first_hop_mse(sc, s1, st.b, {CMatrix::Constant(1, 1, dval)}, 0);
  CHECK(got <= best + 1e-7);
  CHECK(got >= best - 1e-6);
  CHECK(st.b[0].squaredNorm() <= p_s + 1e-6);

  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 3, 2, 6, 3, 2, 10, 10);
  const ChannelRealization ch = generate_channels(cfg, 9);
  const SourceStep z = source_socp(cfg, ch, std::vector<CMatrix>(3, CMatrix::Zero(6, 2)));
  for (int j = 0; j < 3; ++j) CHECK(z.b[j].squaredNorm() <= cfg.p_s[j] + 1e-6);

  std::vector<CMatrix> b = initial_design(cfg, ch).b;
  std::vector<CMatrix> d = first_hop_filters(cfg, ch, b);
  auto worst = [&](const std::vector<CMatrix>& bb, const std::vector<CMatrix>& dd) {
    double e = 0.0;
    for (int j = 0; j < 3; ++j) e = std::max(e, first_hop_mse(cfg, ch, bb, dd, j));
    return e;
  };
  double prev = worst(b, d);
  for (int it = 0; it < 5; ++it) {
    b = source_socp(cfg, ch, d).b;
    CHECK(worst(b, d) <= prev + 1e-7);
    d = first_hop_filters(cfg, ch, b);
    const double now = worst(b, d);
    CHECK(now <= prev + 1e-7);
    prev = now;
  }
}

TEST_CASE("relay Q-SDP: isotropic case, zero power, barrier oracle, eigenvector alignment") {
  const double rho = 6.0;
  SystemConfig c1 = SystemConfig::uniform(Mode::OneWay, 1, 2, 2, 2, 2, 0, 10.0 * std::log10(rho));
  ChannelRealization i2;
  i2.h = {CMatrix::Identity(2, 2)};
  i2.g = {CMatrix::Identity(2, 2)};
  const QSdpResult iso = relay_q_sdp(c1, i2);
  CHECK((iso.q - (rho / 2.0) * CMatrix::Identity(2, 2)).norm() <= 1e-6);
  CHECK(iso.objective == doctest::Approx(2.0 / (1.0 + rho / 2.0)).epsilon(1e-7));
  double grid = 1e300;
  for (int i = 0; i <= 10000; ++i) {
    const double x = rho / 2.0 * i / 10000.0;
    grid = std::min(grid, 2.0 / (1.0 + x));
  }
  CHECK(iso.objective == doctest::Approx(grid).epsilon(1e-7));

  SystemConfig tiny = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 3, 2, 10, -60);
  const ChannelRealization tc = generate_channels(tiny, 1);
  const QSdpResult z = relay_q_sdp(tiny, tc);
  CHECK(z.q.trace().real() <= 1.1e-6);
  CHECK(z.objective == doctest::Approx(2.0).epsilon(1e-5));

  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 3, 2, 10, 10, 1.0, 0.7);
  for (std::uint64_t seed : {2u, 3u}) {
    const ChannelRealization ch = generate_channels(cfg, seed);
    const QSdpResult q = relay_q_sdp(cfg, ch);
    CHECK(linalg::hermitian_evd(q.q).eigenvalues.minCoeff() >= -1e-8);
    CHECK(q.q.trace().real() <= cfg.p_r + 1e-6);
    const double ref = oracle::q_sdp_oracle(ch.g, {-1.0, -1.0}, cfg.p_r, cfg.sigma2_d);
    CHECK(q.objective == doctest::Approx(ref).epsilon(1e-4));
  }

  const SystemConfig one = SystemConfig::uniform(Mode::OneWay, 1, 2, 3, 3, 2, 10, 10);
  const ChannelRealization oc = generate_channels(one, 4);
  const QSdpResult q1 = relay_q_sdp(one, oc);
  const CMatrix gg = oc.g[0].adjoint() * oc.g[0];
  CHECK((q1.q * gg - gg * q1.q).norm() <= 1e-4 * q1.q.norm() * gg.norm());
}

TEST_CASE("relay assembly from Q") {
  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 10, 10);
  const ChannelRealization ch = generate_channels(cfg, 11);
  const std::vector<CMatrix> b = initial_design(cfg, ch).b;
  const std::vector<CMatrix> d = first_hop_filters(cfg, ch, b);
  CHECK(assemble_relay_matrix(cfg, ch, b, d, CMatrix::Zero(4, 4)).norm() == 0.0);

  std::mt19937_64 rng(12);
  const CMatrix q = oracle::random_cmatrix(rng, 4, 1);
  const CMatrix t = relay_shaping_factor(cfg, q * q.adjoint());
  CHECK(t.cols() == 4);
  CHECK((t * t.adjoint() - q * q.adjoint()).norm() <= 1e-10 * q.squaredNorm());
  CHECK(t.rightCols(3).norm() <= 1e-7 * q.norm());
  const cplx phase = t(0, 0) / q(0, 0);
  CHECK(std::abs(std::abs(phase) - 1.0) < 1e-10);
  CHECK((t.col(0) - phase * q).norm() <= 1e-10 * q.norm());

  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix a = oracle::random_cmatrix(rng, 4, 4);
    const CMatrix f = assemble_relay_matrix(cfg, ch, b, d, 50.0 * a * a.adjoint());
    CHECK(relay_power(f, received_covariance(cfg, ch, b)) <= cfg.p_r + 1e-9);
  }
}

TEST_CASE("simplified design") {
  const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, 3, 3, 9, 3, 3, 20, 20);
  const ChannelRealization ch = generate_channels(cfg, 1);
  const SimplifiedDesignOutput out = simplified_design(cfg, ch);
  CHECK_NOTHROW(check_feasible(cfg, ch, out.design));
  CHECK(linalg::hermitian_evd(out.q).eigenvalues.minCoeff() >= -1e-8);
  CHECK(out.q.trace().real() <= cfg.p_r + 1e-6);
  CHECK(out.first_hop_mse.size() == 3);
  CHECK(out.second_hop_mse.size() == 3);
  CHECK(out.inner_iterations >= 1);
  NafOptions no;
  const double naf = worst_mse(cfg, ch, naf_design(cfg, ch, no));
  CHECK(worst_mse(cfg, ch, out.design) < naf);

  SimplifiedOptions literal;
  literal.recovery = RelayRecovery::EigenFactor;
  const SimplifiedDesignOutput lit = simplified_design(cfg, ch, literal);
  CHECK(lit.recovery_used == RelayRecovery::EigenFactor);
  CHECK(worst_mse(cfg, ch, out.design) <= worst_mse(cfg, ch, lit.design) + 1e-12);

  SystemConfig off = cfg;
  std::fill(off.p_s.begin(), off.p_s.end(), 0.0);
  const SimplifiedDesignOutput zs = simplified_design(off, ch);
  for (double e : all_mse(off, ch, zs.design)) CHECK(e == doctest::Approx(3.0).epsilon(1e-12));

  const SystemConfig sc = scalar_config(100.0, 100.0);
  int close = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ChannelRealization s1 = generate_channels(sc, seed);
    const double simp = worst_mse(sc, s1, simplified_design(sc, s1).design);
    const double iter = worst_mse(sc, s1, iterate_minmax(sc, s1, initial_design(sc, s1)).design);
    close += simp <= 1.1 * iter;
  }
  CHECK(close == 5);

  SystemConfig uneven = SystemConfig::uniform(Mode::OneWay, 2, 2, 4, 2, 2, 10, 10);
  uneven.n_b = {1, 2};
  CHECK_THROWS_AS(simplified_design(uneven, generate_channels(uneven, 1)), Error);
}

TEST_CASE("decomposition identity under the structured relay") {
  std::mt19937_64 rng(30);
  for (int inst = 0; inst < 30; ++inst) {
    const int K = 1 + inst % 3;
    const SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, K, 2, 2 * K + 1, 2, 2, 10, 10, 0.5 + 0.1 * (inst % 5),
                                                   0.4 + 0.2 * (inst % 4));
    const ChannelRealization ch = generate_channels(cfg, 300 + inst);
    const TransceiverDesign d = oracle::random_design(cfg, rng);
    for (int k = 0; k < K; ++k) {
      const CMatrix t = oracle::random_cmatrix(rng, cfg.n_r, 2);
      const CMatrix f = structured_relay(cfg, ch, d.b, t, k);
      const double direct = mmse_form_mse(cfg, ch, d.b, f, k);
      TransceiverDesign full{d.b, f, mmse_receivers(cfg, ch, d.b, f)};
      CHECK(link_mse(cfg, ch, full, k).value == doctest::Approx(direct).epsilon(1e-10));
      CHECK(decomposed_mse(cfg, ch, d.b, t, k) == doctest::Approx(direct).epsilon(1e-8));
    }
  }
}

TEST_CASE("first-hop gram approaches identity at high first-hop SNR") {
  std::mt19937_64 rng(40);
  for (int inst = 0; inst < 10; ++inst) {
    const int K = 1 + inst % 3;
    SystemConfig cfg = SystemConfig::uniform(Mode::OneWay, K, 2, 2 * K, 2, 2, 10, 10);
    const ChannelRealization ch = generate_channels(cfg, 400 + inst);
    const TransceiverDesign d = oracle::random_design(cfg, rng);
    CMatrix signal = CMatrix::Zero(cfg.n_r, cfg.n_r);
    for (int j = 0; j < K; ++j) signal += ch.h[j] * d.b[j] * d.b[j].adjoint() * ch.h[j].adjoint();
    cfg.sigma2_r = 1e-8 * signal.trace().real() / cfg.n_r;
    for (int k = 0; k < K; ++k) {
      const RVector ev = linalg::hermitian_evd(first_hop_gram(cfg, ch, d.b, k)).eigenvalues;
      CHECK((ev.array() - 1.0).abs().maxCoeff() <= 1e-3);
    }
    cfg.sigma2_r = 0.0;
    for (int k = 0; k < K; ++k) {
      const CMatrix gram = first_hop_gram(cfg, ch, d.b, k, true);
      CHECK((gram - CMatrix::Identity(2, 2)).norm() <= 1e-8);
    }
  }
}
