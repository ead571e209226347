#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracle.hpp"
#include "spiked/errors.hpp"
#include "spiked/linalg.hpp"
#include "spiked/metrics.hpp"

using namespace spiked;
using namespace spiked::metrics;
using Catch::Approx;

namespace {

// Brute force over the 2^r column sign patterns.
double brute_2inf(const Matrix& uh, const Matrix& us) {
  const auto r = uh.cols();
  double best = INFINITY;
  for (long mask = 0; mask < (1L << r); ++mask) {
    Matrix d = uh;
    for (Eigen::Index k = 0; k < r; ++k)
      if (mask >> k & 1) d.col(k) *= -1.0;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < us.rows(); ++i) worst = std::max(worst, (us.row(i) - d.row(i)).norm());
    best = std::min(best, worst);
  }
  return best;
}

// Frobenius distance minimised over column signs only.
double sign_frob(const Matrix& uh, const Matrix& us) {
  const auto r = uh.cols();
  double best = INFINITY;
  for (long mask = 0; mask < (1L << r); ++mask) {
    Matrix d = uh;
    for (Eigen::Index k = 0; k < r; ++k)
      if (mask >> k & 1) d.col(k) *= -1.0;
    best = std::min(best, (us - d).norm());
  }
  return best;
}

Matrix permute_rows(const Matrix& m, const std::vector<Eigen::Index>& p) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(p[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST_CASE("entrywise distance") {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  CHECK(d_inf(a, a) == 0.0);
  CHECK(d_inf(-a, a) == 0.0);
  CHECK(d_inf(b, a) == 1.0);
  CHECK_THROWS_AS(d_inf(Vector::Zero(3), a), InputError);

  RngStream rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng.index(50);
    const Vector u = oracle::random_unit(n, rng), v = oracle::random_unit(n, rng);
    const double d = d_inf(u, v);
    CHECK(d == d_inf(-u, v));
    CHECK(d == d_inf(u, -v));
    CHECK(d == std::min((v - u).cwiseAbs().maxCoeff(), (v + u).cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("two-to-infinity distance") {
  RngStream rng(42);
  SECTION("identity and the rank-one reduction") {
    const Matrix u = linalg::haar_stiefel(10, 3, rng);
    CHECK(d_2inf_signed(u, u) == 0.0);
    CHECK(d_2inf_signed(-u, u, true) == 0.0);
    const Vector x = oracle::random_unit(10, rng), y = oracle::random_unit(10, rng);
    // Inner-product sign matching need not pick the sign minimising the max entry.
    CHECK(d_2inf_signed(Matrix(x), Matrix(y)) >= d_inf(x, y));
    CHECK(d_2inf_signed(Matrix(x), Matrix(y), true) == Approx(d_inf(x, y)).epsilon(1e-15));
  }
  SECTION("exhaustive search against brute force and sign matching") {
    for (int rep = 0; rep < 500; ++rep) {
      const std::size_t n = 4 + rng.index(30), r = 1 + rng.index(3);
      const Matrix us = linalg::haar_stiefel(n, r, rng);
      Matrix uh = us + 0.3 * linalg::haar_stiefel(n, r, rng);
      // Re-orthonormalise so the unit-norm precondition holds.
      uh = Eigen::HouseholderQR<Matrix>(uh).householderQ() * Matrix::Identity(Eigen::Index(n), Eigen::Index(r));
      for (Eigen::Index k = 0; k < uh.cols(); ++k)
        if (rng.uniform() < 0.5) uh.col(k) *= -1.0;
      const double ex = d_2inf_signed(uh, us, true);
      const double sm = d_2inf_signed(uh, us, false);
      CHECK(ex <= sm + 1e-15);
      CHECK(ex == Approx(brute_2inf(uh, us)).epsilon(1e-12));
      CHECK(std::sqrt(double(n)) * ex >= sign_frob(uh, us) - 1e-12);
    }
  }
  SECTION("sign matching ties go to plus") {
    Matrix us(2, 1), uh(2, 1);
    us << 1, 0;
    uh << 0, 1;
    CHECK(d_2inf_signed(uh, us) == Approx(1.0));
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(d_2inf_signed(Matrix::Constant(4, 1, 1.0), Matrix::Constant(4, 1, 0.5)), InputError);
    CHECK_THROWS_AS(d_2inf_signed(Matrix::Identity(4, 2), Matrix::Identity(4, 3)), InputError);
    CHECK_THROWS_AS(d_2inf_signed(Matrix::Identity(30, 21), Matrix::Identity(30, 21), true), InputError);
    CHECK_NOTHROW(d_2inf_sign_resolved(Matrix::Constant(4, 1, 1.0), Matrix::Constant(4, 1, 0.5), true));
  }
}

TEST_CASE("two-to-infinity row norm") {
  Matrix a(3, 2);
  a << 3, 4, 0, 1, 1, 1;
  CHECK(two_inf_norm(a) == Approx(5.0));
}

TEST_CASE("Frobenius subspace distance") {
  RngStream rng(43);
  const Matrix u = linalg::haar_stiefel(12, 2, rng);
  CHECK(frob_subspace_dist(u, u).value == Approx(0.0).margin(1e-12));
  Matrix swapped(12, 2);
  swapped.col(0) = u.col(1);
  swapped.col(1) = u.col(0);
  CHECK(frob_subspace_dist(swapped, u).value == Approx(0.0).margin(1e-12));
  CHECK(frob_subspace_dist(u * linalg::haar_stiefel(2, 2, rng), u).value == Approx(0.0).margin(1e-12));

  Matrix e1 = Matrix::Zero(5, 1), e2 = Matrix::Zero(5, 1);
  e1(0, 0) = 1;
  e2(1, 0) = 1;
  const auto d = frob_subspace_dist(e2, e1);
  CHECK(d.value == Approx(std::sqrt(2.0)));
  CHECK(d.degenerate);
  CHECK_FALSE(frob_subspace_dist(e1, e1).degenerate);
  CHECK_THROWS_AS(frob_subspace_dist(Matrix::Constant(5, 1, 1.0), e1), InputError);

  SECTION("polar factor is the minimiser") {
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 6 + rng.index(30), r = 1 + rng.index(3);
      const Matrix us = linalg::haar_stiefel(n, r, rng), uh = linalg::haar_stiefel(n, r, rng);
      const double best = frob_subspace_dist(uh, us).value;
      for (int t = 0; t < 20; ++t) {
        const Matrix g = linalg::haar_stiefel(r, r, rng);
        CHECK(best <= (us - uh * g.transpose()).norm() + 1e-12);
      }
      CHECK(best <= sign_frob(uh, us) + 1e-12);
    }
  }
}

TEST_CASE("metric report") {
  RngStream rng(44);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 4 + rng.index(60), r = 1 + rng.index(3);
    const Matrix us = linalg::haar_stiefel(n, r, rng);
    const Matrix uh = linalg::haar_stiefel(n, r, rng);
    const auto m = evaluate(uh, us);
    REQUIRE(m.per_column_d_inf.size() == r);
    CHECK(m.d_inf == *std::max_element(m.per_column_d_inf.begin(), m.per_column_d_inf.end()));
    CHECK(m.frob_available);
    CHECK(m.d_2inf >= m.frob_subspace / std::sqrt(double(n)) - 1e-12);
    for (double x : m.per_column_d_inf) CHECK(x >= 0.0);

    std::vector<Eigen::Index> p(n);
    std::iota(p.begin(), p.end(), Eigen::Index{0});
    std::shuffle(p.begin(), p.end(), rng.engine());
    const auto mp = evaluate(permute_rows(uh, p), permute_rows(us, p));
    CHECK(mp.d_inf == m.d_inf);
    CHECK(mp.d_2inf == m.d_2inf);
    CHECK(mp.per_column_d_inf == m.per_column_d_inf);
    CHECK(mp.frob_subspace == Approx(m.frob_subspace).margin(1e-12));
  }
  // A unit-scale but non-orthonormal estimate gets no Frobenius value.
  const Matrix us = linalg::haar_stiefel(10, 1, rng);
  const auto m = evaluate(1.1 * us, us);
  CHECK_FALSE(m.frob_available);
  CHECK(m.d_inf == Approx(0.1 * us.cwiseAbs().maxCoeff()));
}
