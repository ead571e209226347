#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "oracle.hpp"
#include "spiked/errors.hpp"
#include "spiked/linalg.hpp"

using namespace spiked;
using namespace spiked::linalg;
using Catch::Approx;

namespace {

SymMatrix diag(std::initializer_list<double> d) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) m(i, i) = x, ++i;
  return SymMatrix::from_dense(m);
}

Vector unit(Eigen::Index n, Eigen::Index i) {
  Vector e = Vector::Zero(n);
  e(i) = 1.0;
  return e;
}

}  // namespace

TEST_CASE("top pair of a diagonal matrix") {
  const auto s = top_eigenpairs(diag({2, 1}), 1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].value == Approx(2.0).margin(1e-12));
  CHECK((s[0].vector - unit(2, 0)).norm() < 1e-10);
}

TEST_CASE("pairs ordered by magnitude, matching the Jacobi oracle") {
  const auto a = diag({3, -5, 1});
  const auto s = top_eigenpairs(a, 2);
  REQUIRE(s.size() == 2);
  CHECK(s[0].value == Approx(-5.0).margin(1e-10));
  CHECK((s[0].vector - unit(3, 1)).norm() < 1e-10);
  CHECK(s[1].value == Approx(3.0).margin(1e-10));
  CHECK((s[1].vector - unit(3, 0)).norm() < 1e-10);

  const auto ref = oracle::by_magnitude(oracle::jacobi_eigen(a.dense()).values);
  CHECK(std::abs(ref[0] - s[0].value) < 1e-9);
  CHECK(std::abs(ref[1] - s[1].value) < 1e-9);
}

TEST_CASE("exact rank one") {
  Vector u(2);
  u << 0.6, 0.8;
  const auto a = SymMatrix::symmetrize(5.0 * u * u.transpose());
  const auto s = top_eigenpairs(a, 1);
  CHECK(s[0].value == Approx(5.0).margin(1e-10));
  CHECK((s[0].vector - u).norm() < 1e-10);
}

TEST_CASE("magnitude ties put the positive value first") {
  const auto s = top_eigenpairs(diag({-2, 2, 1}), 2);
  CHECK(s[0].value == Approx(2.0));
  CHECK(s[1].value == Approx(-2.0));
}

TEST_CASE("repeated eigenvalues are all reached") {
  const auto s = top_eigenpairs(diag({5, 5, 1}), 2);
  CHECK(s[0].value == Approx(5.0));
  CHECK(s[1].value == Approx(5.0));
  CHECK(std::abs(s[0].vector.dot(s[1].vector)) < 1e-10);

  RngStream rng(3);
  const Matrix q = haar_stiefel(12, 12, rng);
  Vector d = Vector::Constant(12, 1.0);
  d.head(4).setConstant(7.0);
  const auto a = SymMatrix::symmetrize(q * d.asDiagonal() * q.transpose());
  const auto t = top_eigenpairs(a, 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(t[k].value == Approx(7.0).margin(1e-9));
}

TEST_CASE("zero matrix") {
  const auto s = top_eigenpairs(SymMatrix(4), 2);
  CHECK(s[0].value == 0.0);
  CHECK(s[1].value == 0.0);
  CHECK(std::abs(s[0].vector.dot(s[1].vector)) < 1e-12);
}

TEST_CASE("invalid eigensolver input") {
  CHECK_THROWS_AS(top_eigenpairs(diag({1, 2}), 0), InputError);
  CHECK_THROWS_AS(top_eigenpairs(diag({1, 2}), 3), InputError);
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(SymMatrix::from_dense(m), InputError);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1e-3;
  CHECK_THROWS_AS(SymMatrix::from_dense(asym), InputError);
}

TEST_CASE("spectrum invariants on random matrices") {
  RngStream rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rng.index(40);
    const std::size_t r = 1 + rng.index(std::min<std::size_t>(n, 6));
    const auto a = oracle::random_symmetric(n, rng);
    const auto s = top_eigenpairs(a, r);
    REQUIRE(s.size() == r);
    const double bound = residual_bound(a.max_abs(), n, 1e-10);
    for (std::size_t k = 0; k < r; ++k) {
      const auto& p = s[k];
      CHECK(std::abs(p.vector.norm() - 1.0) < 1e-12);
      CHECK((a.multiply(p.vector) - p.value * p.vector).norm() <= bound);
      Eigen::Index imax = 0;
      p.vector.cwiseAbs().maxCoeff(&imax);
      CHECK(p.vector(imax) >= 0.0);
      if (k > 0) CHECK(std::abs(s[k - 1].value) >= std::abs(p.value));
      for (std::size_t j = 0; j < k; ++j) CHECK(std::abs(s[j].vector.dot(p.vector)) < 1e-10);
    }
  }
}

TEST_CASE("eigenvalues agree with the Jacobi oracle") {
  RngStream rng(12);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 1 + rng.index(16);
    const auto a = oracle::random_symmetric(n, rng);
    const auto s = top_eigenpairs(a, n);
    const auto ref = oracle::by_magnitude(oracle::jacobi_eigen(a.dense()).values);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(ref[k] - s[k].value) < 1e-9);
  }
}

TEST_CASE("Haar orthogonal matrices") {
  RngStream rng(5);
  SECTION("n = 1 has two elements") {
    for (int i = 0; i < 20; ++i) {
      const auto h = haar_orthogonal(1, rng);
      CHECK(std::abs(std::abs(h.dense()(0, 0)) - 1.0) < 1e-15);
    }
  }
  SECTION("orthogonality") {
    for (std::size_t n : {2, 7, 33, 100}) CHECK(haar_orthogonal(n, rng).orthogonality_defect() <= 1e-10);
  }
  SECTION("first entry has mean zero") {
    double sum = 0.0;
    const int draws = 2000;
    for (int i = 0; i < draws; ++i) sum += haar_orthogonal(64, rng).dense()(0, 0);
    CHECK(std::abs(sum / draws) <= 4.0 / std::sqrt(static_cast<double>(draws)));
  }
  SECTION("deterministic given the stream state") {
    RngStream a(77), b(77);
    CHECK(haar_orthogonal(9, a).dense() == haar_orthogonal(9, b).dense());
  }
}

TEST_CASE("factored rotation agrees with its dense form") {
  RngStream rng(8);
  const HaarRotation h(20, rng);
  const Matrix dense = h.to_matrix().dense();
  const Vector x = oracle::random_unit(20, rng);
  CHECK((h.apply(x) - dense * x).norm() < 1e-12);
  CHECK((h.apply_transpose(x) - dense.transpose() * x).norm() < 1e-12);
  CHECK((h.apply_transpose(h.apply(x)) - x).norm() < 1e-12);
  const Matrix block = haar_stiefel(20, 3, rng);
  CHECK((h.apply(block) - dense * block).norm() < 1e-12);
}

TEST_CASE("Stiefel draws have orthonormal columns") {
  RngStream rng(9);
  const Matrix u = haar_stiefel(50, 4, rng);
  CHECK((u.transpose() * u - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conjugation") {
  RngStream rng(10);
  SECTION("identity") {
    const auto a = oracle::random_symmetric(6, rng);
    const auto c = conjugate(a, OrthogonalMatrix(Matrix::Identity(6, 6)));
    CHECK(c.dense() == a.dense());
  }
  SECTION("quarter turn swaps a diagonal") {
    Matrix rot(2, 2);
    rot << 0, -1, 1, 0;
    const auto c = conjugate(diag({1, 2}), OrthogonalMatrix(rot));
    Matrix expect(2, 2);
    expect << 2, 0, 0, 1;
    CHECK((c.dense() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("similarity invariance") {
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t n = 2 + rng.index(31);
      const auto a = oracle::random_symmetric(n, rng);
      const auto c = conjugate(a, haar_orthogonal(n, rng));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) REQUIRE(c(i, j) == c(j, i));
      const auto ea = oracle::by_magnitude(oracle::jacobi_eigen(a.dense()).values);
      const auto ec = oracle::by_magnitude(oracle::jacobi_eigen(c.dense()).values);
      for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(ea[k] - ec[k]) < 1e-9);
    }
  }
  SECTION("dimension mismatch") {
    CHECK_THROWS_AS(conjugate(diag({1, 2}), OrthogonalMatrix(Matrix::Identity(3, 3))), InputError);
  }
}

TEST_CASE("sign conjugation") {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  const auto a = SymMatrix::from_dense(m);
  const std::vector<double> flip{1.0, -1.0}, ones{1.0, 1.0};
  const auto b = sign_conjugate(a, flip);
  Matrix expect(2, 2);
  expect << 0, -1, -1, 0;
  CHECK(b.dense() == expect);
  CHECK(sign_conjugate(a, ones).dense() == a.dense());
  CHECK(sign_conjugate(b, flip).dense() == a.dense());
  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(sign_conjugate(a, bad), InputError);

  RngStream rng(4);
  const auto r = oracle::random_symmetric(9, rng);
  std::vector<double> q(9);
  for (auto& x : q) x = rng.rademacher();
  const auto once = sign_conjugate(r, q);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) CHECK(once(i, j) == once(j, i));
  CHECK(sign_conjugate(once, q).dense() == r.dense());
}
