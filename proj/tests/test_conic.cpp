#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "relaynet/conic.hpp"

using namespace relaynet;
using namespace relaynet::conic;

namespace {

double min_eig(const RMatrix& m) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(m);
  return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("embed_hermitian examples") {
  CHECK((embed_hermitian(CMatrix(CMatrix::Identity(2, 2))) - RMatrix::Identity(4, 4)).norm() == 0.0);
  CMatrix m(2, 2);
  m << 0.0, cplx(0, 1), cplx(0, -1), 0.0;
  Eigen::SelfAdjointEigenSolver<RMatrix> es(embed_hermitian(m));
  CHECK(es.eigenvalues()(0) == doctest::Approx(-1.0));
  CHECK(es.eigenvalues()(1) == doctest::Approx(-1.0));
  CHECK(es.eigenvalues()(2) == doctest::Approx(1.0));
  CHECK(es.eigenvalues()(3) == doctest::Approx(1.0));

  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    CMatrix h = oracle::random_hermitian(rng, 3);
    if (t % 2 == 0) {
      const CMatrix b = oracle::random_cmatrix(rng, 3, 3);
      h = b * b.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> ec(h);
    const bool psd = ec.eigenvalues()(0) >= 0.0;
    CHECK(psd == (min_eig(embed_hermitian(h)) >= -1e-12));
  }
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(embed_hermitian(bad), Error);
  HermitianAffineMatrix lmi(2);
  CHECK_THROWS_AS(lmi.add_term(0, CMatrix::Identity(3, 3)), Error);
}

TEST_CASE("minimum eigenvalue program") {
  ConicProgram p;
  const int x11 = p.add_variable();
  const int x12 = p.add_variable();
  const int x22 = p.add_variable();
  p.set_objective(x11, 1.0);
  p.set_objective(x22, 2.0);
  AffineScalar tr(-1.0);
  tr.add(x11, 1.0).add(x22, 1.0);
  p.equalities.push_back(tr);
  SymAffineMatrix blk;
  blk.dim = 2;
  blk.constant = RMatrix::Zero(2, 2);
  blk.terms.push_back({x11, {{0, 0, 1.0}}});
  blk.terms.push_back({x12, {{0, 1, 1.0}, {1, 0, 1.0}}});
  blk.terms.push_back({x22, {{1, 1, 1.0}}});
  p.add_psd(blk);
  const ConicSolution s = solve(p);
  REQUIRE(s.optimal());
  CHECK(s.objective_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.primal_values(x11) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.primal_values(x12)) <= 1e-6);
  CHECK(std::abs(s.primal_values(x22)) <= 1e-6);
  CHECK(s.duality_gap <= 1e-7 * (1.0 + std::abs(s.objective_value)));
  CHECK(s.kkt_residual <= 1e-7);
}

TEST_CASE("fixed-vector second-order cone") {
  ConicProgram p;
  const int t = p.add_variable();
  p.set_objective(t, 1.0);
  SocConstraint sc;
  sc.t.add(t, 1.0);
  sc.v = {AffineScalar(3.0), AffineScalar(4.0)};
  p.socs.push_back(sc);
  const ConicSolution s = solve(p);
  REQUIRE(s.optimal());
  CHECK(s.objective_value == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("infeasible and unbounded programs are certified") {
  ConicProgram p;
  const int x = p.add_variable();
  p.set_objective(x, 1.0);
  p.nonneg.push_back(AffineScalar(-1.0).add(x, 1.0));
  p.nonneg.push_back(AffineScalar(0.0).add(x, -1.0));
  CHECK(solve(p).status == SolveStatus::Infeasible);

  ConicProgram u;
  const int y = u.add_variable();
  u.set_objective(y, -1.0);
  u.nonneg.push_back(AffineScalar(0.0).add(y, 1.0));
  CHECK(solve(u).status == SolveStatus::Infeasible);
}

TEST_CASE("validation rejects malformed programs") {
  ConicProgram p;
  CHECK_THROWS_AS(solve(p), Error);
  p.add_variable();
  p.nonneg.push_back(AffineScalar(0.0).add(3, 1.0));
  CHECK_THROWS_AS(solve(p), Error);
}

TEST_CASE("2x2 LMI matches barrier-descent oracle") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const oracle::LmiProblem lp = oracle::random_lmi(rng, 3, {2});
    const double ref = oracle::barrier_descent(lp);
    const ConicSolution s = solve(oracle::to_program(lp));
    REQUIRE(s.optimal());
    CHECK(std::abs(s.objective_value - ref) <= 1e-5 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("random mixed programs: certificates, feasibility, weak duality, determinism") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    const ConicProgram p = oracle::random_mixed(rng, 6, 3, {3, 4}, {3, 2}, t % 3 == 0 ? 2 : 0);
    const ConicSolution s = solve(p);
    REQUIRE_MESSAGE(s.optimal(), s.diagnostics);
    CHECK(s.duality_gap <= 1e-7 * (1.0 + std::abs(s.objective_value)));
    CHECK(s.kkt_residual <= 1e-7);
    CHECK(max_violation(p, s.primal_values) <= 1e-7);
    for (const auto& h : s.history)
      if (h.primal_residual <= 1e-9 && h.dual_residual <= 1e-9)
        CHECK(h.primal_objective >= h.dual_objective - 1e-9);
    const ConicSolution again = solve(p);
    CHECK(again.iterations == s.iterations);
    CHECK((again.primal_values - s.primal_values).norm() == 0.0);
  }
}

TEST_CASE("dump_program writes a standard-form listing") {
  ConicProgram p;
  const int t = p.add_variable();
  p.set_objective(t, 1.0);
  SocConstraint sc;
  sc.t.add(t, 1.0);
  sc.v = {AffineScalar(0.1)};
  p.socs.push_back(sc);
  std::ostringstream os;
  dump_program(p, os);
  const std::string out = os.str();
  CHECK(out.find("variables 1") != std::string::npos);
  CHECK(out.find("0.10000000000000001") != std::string::npos);
}
