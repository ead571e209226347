#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spiked/rng.hpp"

namespace spiked::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense real symmetric matrix. Every constructor mirrors or verifies, so
/// entries(i,j) == entries(j,i) holds bit-for-bit for the lifetime of the value.
class SymMatrix {
 public:
  /// n x n zero matrix.
  explicit SymMatrix(std::size_t n);

  /// Accepts `m` if square, finite and symmetric within `tol` (absolute);
  /// the result is the exact average of m and m^T.
  static SymMatrix from_dense(const Matrix& m, double tol = 0.0);

  /// Unconditionally symmetrizes by averaging (i,j) and (j,i).
  static SymMatrix symmetrize(const Matrix& m);

  /// Fills the upper triangle (i <= j) from `f(i, j)` in row-major order and mirrors it.
  template <class F>
  static SymMatrix from_upper(std::size_t n, F&& f) {
    SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) s.set(i, j, f(i, j));
    return s;
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v);

  const Matrix& dense() const noexcept { return m_; }
  double max_abs() const;
  Vector multiply(const Vector& x) const { return m_.selfadjointView<Eigen::Lower>() * x; }

  SymMatrix operator-() const;
  SymMatrix operator+(const SymMatrix& other) const;

 private:
  SymMatrix() = default;
  Matrix m_;
};

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

/// Eigenpairs sorted by |value| descending (ties: positive first, then by
/// ascending position in the underlying decomposition). Vectors are unit norm
/// with their largest-|entry| coordinate nonnegative.
struct Spectrum {
  std::vector<EigenPair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  const EigenPair& operator[](std::size_t k) const { return pairs[k]; }
  /// n x r matrix of the eigenvectors, column k = pairs[k].vector.
  Matrix vectors() const;
  Vector values() const;
};

/// Applies the sign convention of EigenPair in place.
void canonicalize_sign(Vector& v);

struct EigOptions {
  double tol = 1e-10;
  /// Total Lanczos steps allowed, as a multiple of n.
  std::size_t budget_factor = 10;
};

/// The r eigenpairs of largest |value|. Each returned pair satisfies
/// ||A v - lambda v||_2 <= tol * (1 + ||A||_max * n).
///
/// Implemented with Lanczos and full reorthogonalization. An exhausted
/// Krylov space (breakdown) is restarted from a fresh vector orthogonal to
/// everything seen so far, so repeated eigenvalues are still reached.
/// Throws InputError on non-finite input or on r outside [1, n] and
/// ConvergenceError when the budget runs out.
Spectrum top_eigenpairs(const SymMatrix& a, std::size_t r, double tol = 1e-10);
Spectrum top_eigenpairs(const SymMatrix& a, std::size_t r, const EigOptions& opts);

/// Residual bound used by top_eigenpairs for an n x n matrix with the given max |entry|.
double residual_bound(double max_abs, std::size_t n, double tol);

class OrthogonalMatrix {
 public:
  explicit OrthogonalMatrix(Matrix h);
  std::size_t n() const noexcept { return static_cast<std::size_t>(h_.rows()); }
  const Matrix& dense() const noexcept { return h_; }
  /// max |H^T H - I|.
  double orthogonality_defect() const;

 private:
  Matrix h_;
};

/// Haar-distributed orthogonal transform kept in factored (Householder) form,
/// so applying it to a vector costs O(n^2) and no explicit matrix is formed.
/// The law is exact: Q from QR of a Gaussian matrix with each column scaled
/// by the sign of the matching diagonal entry of R.
class HaarRotation {
 public:
  HaarRotation(std::size_t n, RngStream& rng);

  std::size_t n() const noexcept { return signs_.size(); }
  /// H x.
  Vector apply(const Vector& x) const;
  /// H^T x.
  Vector apply_transpose(const Vector& x) const;
  /// H X for an n x k block.
  Matrix apply(const Matrix& x) const;
  OrthogonalMatrix to_matrix() const;

 private:
  Eigen::HouseholderQR<Matrix> qr_;
  Vector signs_;
};

/// Haar-distributed element of O(n), deterministic given the stream state.
OrthogonalMatrix haar_orthogonal(std::size_t n, RngStream& rng);

/// n x r matrix with orthonormal columns, Haar-distributed on the Stiefel manifold.
Matrix haar_stiefel(std::size_t n, std::size_t r, RngStream& rng);

/// H A H^T, re-symmetrized by averaging.
SymMatrix conjugate(const SymMatrix& a, const OrthogonalMatrix& h);

/// Q A Q with Q = diag(q); q entries must be exactly +1 or -1.
SymMatrix sign_conjugate(const SymMatrix& a, std::span<const double> q);

}  // namespace spiked::linalg
