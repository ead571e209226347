#pragma once

#include <vector>

#include "spiked/linalg.hpp"

namespace spiked::metrics {

using linalg::Matrix;
using linalg::Vector;

/// min(||u* - u||_inf, ||u* + u||_inf).
double d_inf(const Vector& u_hat, const Vector& u_star);

/// ||U* - U_hat D||_{2,inf} with D a diagonal sign matrix. Non-exhaustive:
/// D_kk = sign(<U_hat_k, U*_k>) with ties to +1. Exhaustive: minimum over
/// all 2^r choices (r <= 20). Columns must be unit norm within 1e-6.
double d_2inf_signed(const Matrix& u_hat, const Matrix& u_star, bool exhaustive = false);

/// The same sign-resolved distance without the unit-norm precondition, for
/// estimates (such as refined eigenvectors) that are only unit-scale.
double d_2inf_sign_resolved(const Matrix& u_hat, const Matrix& u_star, bool exhaustive);

/// max_i ||A_{i,.}||_2.
double two_inf_norm(const Matrix& a);

struct FrobResult {
  double value = 0.0;
  bool degenerate = false;  // cross-Gram numerically zero, Gamma = I was used
};

/// min over orthogonal Gamma of ||U* - U_hat Gamma^T||_F, with Gamma the
/// polar factor of U*^T U_hat.
FrobResult frob_subspace_dist(const Matrix& u_hat, const Matrix& u_star);

struct MetricReport {
  double d_inf = 0.0;  // max over columns
  double d_2inf = 0.0;
  double frob_subspace = 0.0;
  bool frob_degenerate = false;
  bool frob_available = false;  // false when U_hat is not orthonormal
  std::vector<double> per_column_d_inf;
};

MetricReport evaluate(const Matrix& u_hat, const Matrix& u_star, bool exhaustive = true);

}  // namespace spiked::metrics
