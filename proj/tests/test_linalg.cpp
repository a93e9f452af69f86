#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "relaynet/linalg.hpp"

using namespace relaynet;
using namespace relaynet::linalg;

TEST_CASE("kron examples") {
  CHECK((kron(identity(2), identity(2)) - identity(4)).norm() == 0.0);
  CMatrix a(1, 1);
  a << 2.0;
  CMatrix b(2, 2);
  b << 0.0, 1.0, 1.0, 0.0;
  CMatrix expect(2, 2);
  expect << 0.0, 2.0, 2.0, 0.0;
  CHECK((kron(a, b) - expect).norm() == 0.0);
}

TEST_CASE("kron vec identity holds on random triples") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const CMatrix a = oracle::random_cmatrix(rng, 2, 3);
    const CMatrix x = oracle::random_cmatrix(rng, 3, 2);
    const CMatrix b = oracle::random_cmatrix(rng, 2, 2);
    const CMatrix lhs = vec(a * x * b);
    const CMatrix rhs = kron(b.transpose(), a) * vec(x);
    CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, lhs.norm()));
  }
}

TEST_CASE("vec and unvec") {
  CMatrix a(2, 2);
  a << 1.0, 3.0, 2.0, 4.0;
  const CMatrix v = vec(a);
  for (int i = 0; i < 4; ++i) CHECK(v(i, 0) == cplx(i + 1.0, 0.0));
  CHECK(vec(CMatrix::Zero(2, 2)).norm() == 0.0);
  std::mt19937_64 rng(3);
  const CMatrix r = oracle::random_cmatrix(rng, 3, 2);
  CHECK((unvec(vec(r), 3, 2) - r).norm() == 0.0);
  CHECK_THROWS_AS(unvec(vec(r), 2, 2), Error);
}

TEST_CASE("block_diag") {
  std::vector<CMatrix> blocks{identity(1), identity(2)};
  CHECK((block_diag(blocks) - identity(3)).norm() == 0.0);
  CMatrix two(1, 1), three(1, 1);
  two << 2.0;
  three << 3.0;
  std::vector<CMatrix> diag{two, three};
  const CMatrix d = block_diag(diag);
  CHECK(d(0, 0) == cplx(2.0));
  CHECK(d(1, 1) == cplx(3.0));
  CHECK(d(0, 1) == cplx(0.0));
  std::mt19937_64 rng(5);
  std::vector<CMatrix> rb{oracle::random_cmatrix(rng, 2, 2), oracle::random_cmatrix(rng, 3, 3)};
  CHECK(std::abs(block_diag(rb).trace() - rb[0].trace() - rb[1].trace()) <= 1e-12);
  CHECK_THROWS_AS(block_diag(std::vector<CMatrix>{}), Error);
}

TEST_CASE("hermitian_evd") {
  const HermitianEVD e = hermitian_evd(identity(3));
  for (int i = 0; i < 3; ++i) CHECK(e.eigenvalues(i) == doctest::Approx(1.0));
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 3.0;
  const HermitianEVD e2 = hermitian_evd(d);
  CHECK(e2.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(e2.eigenvalues(1) == doctest::Approx(1.0));
  CHECK(std::abs(e2.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e2.eigenvectors(0, 1)) == doctest::Approx(1.0));

  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const CMatrix a = oracle::random_hermitian(rng, 4);
    const HermitianEVD ev = hermitian_evd(a);
    const CMatrix& u = ev.eigenvectors;
    CHECK((u * ev.eigenvalues.asDiagonal() * u.adjoint() - a).norm() <= 1e-10 * std::max(1.0, a.norm()));
    CHECK((u.adjoint() * u - identity(4)).norm() <= 1e-10);
    for (int i = 0; i + 1 < 4; ++i) CHECK(ev.eigenvalues(i) >= ev.eigenvalues(i + 1));
    const HermitianEVD adj = hermitian_evd(a.adjoint());
    CHECK((ev.eigenvalues - adj.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(hermitian_evd(CMatrix::Zero(2, 3)), Error);
  CMatrix nh = identity(2);
  nh(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_evd(nh), Error);
}

TEST_CASE("psd_sqrt") {
  CHECK((psd_sqrt(identity(3)) - identity(3)).norm() <= 1e-14);
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  const CMatrix s = psd_sqrt(d);
  CHECK(s(0, 0).real() == doctest::Approx(2.0));
  CHECK(s(1, 1).real() == doctest::Approx(3.0));
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const CMatrix b = oracle::random_cmatrix(rng, 4, 2);
    const CMatrix a = b * b.adjoint();
    const CMatrix r = psd_sqrt(a);
    CHECK((r * r - a).norm() <= 1e-9 * std::max(1.0, a.norm()));
    CHECK((r * a - a * r).norm() <= 1e-8 * a.squaredNorm());
  }
  CMatrix neg = identity(2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(psd_sqrt(neg), Error);
}

TEST_CASE("solve_hpd") {
  std::mt19937_64 rng(13);
  const CMatrix r = oracle::random_cmatrix(rng, 3, 2);
  CHECK((solve_hpd(identity(3), r) - r).norm() <= 1e-14);
  CHECK((solve_hpd(2.0 * identity(3), identity(3)) - 0.5 * identity(3)).norm() <= 1e-14);
  for (int t = 0; t < 20; ++t) {
    const CMatrix a0 = oracle::random_cmatrix(rng, 5, 5);
    const CMatrix a = a0.adjoint() * a0 + identity(5);
    const CMatrix b = oracle::random_cmatrix(rng, 5, 1);
    CHECK((a * solve_hpd(a, b) - b).norm() <= 1e-9 * b.norm());
  }
  CHECK_THROWS_AS(solve_hpd(CMatrix::Zero(2, 2), identity(2)), Error);
  try {
    solve_hpd(-identity(2), identity(2));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotHpd);
  }
}

TEST_CASE("pinv_solve_psd and thin svd") {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 2.0;
  CMatrix rhs = identity(2);
  const CMatrix x = pinv_solve_psd(a, rhs);
  CHECK(x(0, 0).real() == doctest::Approx(0.5));
  CHECK(std::abs(x(1, 1)) == 0.0);
  std::mt19937_64 rng(17);
  const CMatrix m = oracle::random_cmatrix(rng, 4, 3);
  const ThinSVD s = thin_svd_via_evd(m);
  Eigen::JacobiSVD<CMatrix> ref(m);
  CHECK((s.singular_values - ref.singularValues()).norm() <= 1e-10);
}
