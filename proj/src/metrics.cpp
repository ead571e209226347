#include "spiked/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "spiked/errors.hpp"

namespace spiked::metrics {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InputError(std::string(who) + ": shape mismatch");
  if (a.cols() == 0) throw InputError(std::string(who) + ": need at least one column");
}

void require_unit_columns(const Matrix& a, const char* who) {
  for (Eigen::Index k = 0; k < a.cols(); ++k)
    if (std::abs(a.col(k).norm() - 1.0) > 1e-6) throw InputError(std::string(who) + ": columns must be unit norm");
}

}  // namespace

double d_inf(const Vector& u_hat, const Vector& u_star) {
  if (u_hat.size() != u_star.size()) throw InputError("d_inf: length mismatch");
  if (u_hat.size() == 0) return 0.0;
  const double minus = (u_star - u_hat).cwiseAbs().maxCoeff();
  const double plus = (u_star + u_hat).cwiseAbs().maxCoeff();
  return std::min(minus, plus);
}

double two_inf_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return std::sqrt(a.rowwise().squaredNorm().maxCoeff());
}

double d_2inf_signed(const Matrix& u_hat, const Matrix& u_star, bool exhaustive) {
  require_same_shape(u_hat, u_star, "d_2inf_signed");
  require_unit_columns(u_hat, "d_2inf_signed");
  require_unit_columns(u_star, "d_2inf_signed");
  return d_2inf_sign_resolved(u_hat, u_star, exhaustive);
}

double d_2inf_sign_resolved(const Matrix& u_hat, const Matrix& u_star, bool exhaustive) {
  require_same_shape(u_hat, u_star, "d_2inf_sign_resolved");
  const Eigen::Index r = u_hat.cols();

  if (!exhaustive) {
    Matrix flipped = u_hat;
    for (Eigen::Index k = 0; k < r; ++k)
      if (u_hat.col(k).dot(u_star.col(k)) < 0.0) flipped.col(k) *= -1.0;
    return two_inf_norm(u_star - flipped);
  }

  if (r > 20) throw InputError("d_2inf_signed: exhaustive search limited to r <= 20");
  // Row norms split per column: ||row||^2 = sum_k (U*_ik - d_k Uh_ik)^2.
  const Matrix minus = (u_star - u_hat).array().square();
  const Matrix plus = (u_star + u_hat).array().square();
  double best = std::numeric_limits<double>::infinity();
  const std::uint32_t patterns = 1u << r;
  Vector rows(u_hat.rows());
  for (std::uint32_t mask = 0; mask < patterns; ++mask) {
    rows.setZero();
    for (Eigen::Index k = 0; k < r; ++k) rows += ((mask >> k) & 1u) ? plus.col(k) : minus.col(k);
    best = std::min(best, rows.maxCoeff());
  }
  return std::sqrt(std::max(best, 0.0));
}

FrobResult frob_subspace_dist(const Matrix& u_hat, const Matrix& u_star) {
  require_same_shape(u_hat, u_star, "frob_subspace_dist");
  const Eigen::Index r = u_hat.cols();
  const Matrix eye = Matrix::Identity(r, r);
  if ((u_hat.transpose() * u_hat - eye).cwiseAbs().maxCoeff() > 1e-6 ||
      (u_star.transpose() * u_star - eye).cwiseAbs().maxCoeff() > 1e-6)
    throw InputError("frob_subspace_dist: columns must be orthonormal");

  const Matrix cross = u_star.transpose() * u_hat;
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  FrobResult out;
  Matrix gamma_t = eye;
  if (svd.singularValues().maxCoeff() < 1e-12) {
    out.degenerate = true;
  } else {
    gamma_t = svd.matrixV() * svd.matrixU().transpose();
  }
  out.value = (u_star - u_hat * gamma_t).norm();
  return out;
}

MetricReport evaluate(const Matrix& u_hat, const Matrix& u_star, bool exhaustive) {
  require_same_shape(u_hat, u_star, "evaluate");
  MetricReport rep;
  for (Eigen::Index k = 0; k < u_hat.cols(); ++k) {
    const double d = d_inf(u_hat.col(k), u_star.col(k));
    rep.per_column_d_inf.push_back(d);
    rep.d_inf = std::max(rep.d_inf, d);
  }
  rep.d_2inf = d_2inf_sign_resolved(u_hat, u_star, exhaustive && u_hat.cols() <= 20);
  const Matrix eye = Matrix::Identity(u_hat.cols(), u_hat.cols());
  if ((u_hat.transpose() * u_hat - eye).cwiseAbs().maxCoeff() <= 1e-6) {
    const auto f = frob_subspace_dist(u_hat, u_star);
    rep.frob_subspace = f.value;
    rep.frob_degenerate = f.degenerate;
    rep.frob_available = true;
  }
  return rep;
}

}  // namespace spiked::metrics
