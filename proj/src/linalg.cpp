#include "spiked/linalg.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>

#include "spiked/errors.hpp"

namespace spiked::linalg {

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

SymMatrix::SymMatrix(std::size_t n) {
  if (n == 0) throw InputError("SymMatrix: dimension must be >= 1");
  m_ = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

SymMatrix SymMatrix::from_dense(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError("SymMatrix: matrix must be square and non-empty");
  if (!m.allFinite()) throw InputError("SymMatrix: non-finite entry");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol)
    throw InputError("SymMatrix: asymmetry " + std::to_string(asym) + " exceeds tolerance " +
                     std::to_string(tol));
  return symmetrize(m);
}

SymMatrix SymMatrix::symmetrize(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError("SymMatrix: matrix must be square and non-empty");
  SymMatrix s;
  s.m_ = m;
  const auto n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      s.m_(i, j) = v;
      s.m_(j, i) = v;
    }
  return s;
}

void SymMatrix::set(std::size_t i, std::size_t j, double v) {
  m_(i, j) = v;
  m_(j, i) = v;
}

double SymMatrix::max_abs() const { return m_.cwiseAbs().maxCoeff(); }

SymMatrix SymMatrix::operator-() const {
  SymMatrix s;
  s.m_ = -m_;
  return s;
}

SymMatrix SymMatrix::operator+(const SymMatrix& other) const {
  if (other.n() != n()) throw InputError("SymMatrix: dimension mismatch in sum");
  SymMatrix s;
  s.m_ = m_ + other.m_;
  return s;
}

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

Matrix Spectrum::vectors() const {
  if (pairs.empty()) return {};
  Matrix u(pairs.front().vector.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) u.col(static_cast<Eigen::Index>(k)) = pairs[k].vector;
  return u;
}

Vector Spectrum::values() const {
  Vector v(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) v(static_cast<Eigen::Index>(k)) = pairs[k].value;
  return v;
}

void canonicalize_sign(Vector& v) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best_abs) {
      best_abs = std::abs(v(i));
      best = i;
    }
  }
  if (v.size() > 0 && v(best) < 0.0) v = -v;
}

double residual_bound(double max_abs, std::size_t n, double tol) {
  return tol * (1.0 + max_abs * static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Lanczos
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  double value;
  Vector vector;
  std::size_t order;
};

bool spectrum_before(const Candidate& x, const Candidate& y) {
  const double ax = std::abs(x.value), ay = std::abs(y.value);
  if (ax != ay) return ax > ay;
  if ((x.value > 0) != (y.value > 0)) return x.value > 0;
  return x.order < y.order;
}

class Lanczos {
 public:
  Lanczos(const SymMatrix& a, std::size_t r, const EigOptions& opts)
      : a_(a),
        n_(a.n()),
        r_(r),
        bound_(residual_bound(a.max_abs(), a.n(), opts.tol)),
        budget_(opts.budget_factor * a.n()),
        rng_(derive_seed({0x1a2c05ULL, a.n()})) {
    basis_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(std::min<std::size_t>(n_, 64)));
  }

  Spectrum run() {
    start_block();
    std::size_t steps = 0;
    double best = std::numeric_limits<double>::infinity();
    while (true) {
      if (steps++ > budget_)
        throw ConvergenceError("top_eigenpairs: Lanczos budget exhausted", best);
      const bool broke = step();
      if (broke) {
        const std::size_t block_size = alpha_.size();
        const double block_value = alpha_.front();
        freeze_block();
        ++blocks_;
        if (explored_ == n_) break;
        // A later block that is exhausted after one step means the remaining
        // complement is (almost surely) a single eigenspace; stop if that
        // eigenvalue cannot reach the top r.
        if (blocks_ > 1 && block_size == 1 && frozen_.size() >= r_ &&
            std::abs(block_value) < rth_frozen_magnitude())
          break;
        if (!start_block()) break;
        continue;
      }
      const std::size_t m = alpha_.size();
      if (m < 20 || m % 5 == 0) {
        auto res = check_block();
        best = std::min(best, res.worst_top);
        if (res.done) break;
      }
    }
    return assemble();
  }

 private:
  struct CheckResult {
    bool done = false;
    double worst_top = std::numeric_limits<double>::infinity();
  };

  Eigen::Index col(std::size_t j) const { return static_cast<Eigen::Index>(j); }

  void ensure_capacity(std::size_t cols) {
    if (static_cast<std::size_t>(basis_.cols()) >= cols) return;
    const std::size_t grown = std::min(n_, std::max(cols, 2 * static_cast<std::size_t>(basis_.cols())));
    basis_.conservativeResize(Eigen::NoChange, col(grown));
  }

  // Project w against every basis vector stored so far (two passes).
  void orthogonalize(Vector& w) const {
    if (explored_ == 0) return;
    auto v = basis_.leftCols(col(explored_));
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= v * (v.transpose() * w);
  }

  bool start_block() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vector v(static_cast<Eigen::Index>(n_));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng_.normal();
      orthogonalize(v);
      const double nv = v.norm();
      if (nv > 1e-8) {
        ensure_capacity(explored_ + 1);
        basis_.col(col(explored_)) = v / nv;
        block_start_ = explored_;
        ++explored_;
        alpha_.clear();
        beta_.clear();
        return true;
      }
    }
    return false;
  }

  // One Lanczos step on the current block. Returns true on breakdown.
  bool step() {
    const std::size_t j = explored_ - 1;
    Vector w = a_.multiply(basis_.col(col(j)));
    const double alpha = basis_.col(col(j)).dot(w);
    alpha_.push_back(alpha);
    orthogonalize(w);
    const double beta = w.norm();
    if (beta <= 0.01 * bound_ || explored_ == n_) {
      beta_.push_back(0.0);
      return true;
    }
    beta_.push_back(beta);
    ensure_capacity(explored_ + 1);
    basis_.col(col(explored_)) = w / beta;
    ++explored_;
    return false;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> block_eig() const {
    const auto m = static_cast<Eigen::Index>(alpha_.size());
    Vector d = Eigen::Map<const Vector>(alpha_.data(), m);
    Vector e = m > 1 ? Vector(Eigen::Map<const Vector>(beta_.data(), m - 1)) : Vector();
    Eigen::SelfAdjointEigenSolver<Matrix> es;
    if (m == 1) {
      Matrix t(1, 1);
      t(0, 0) = d(0);
      es.compute(t);
    } else {
      es.computeFromTridiagonal(d, e);
    }
    return es;
  }

  Vector ritz_vector(const Vector& s) const {
    return basis_.middleCols(col(block_start_), s.size()) * s;
  }

  void freeze_block() {
    auto es = block_eig();
    const auto m = es.eigenvalues().size();
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector v = ritz_vector(es.eigenvectors().col(i));
      v.normalize();
      frozen_.push_back({es.eigenvalues()(i), std::move(v), order_++});
    }
    alpha_.clear();
    beta_.clear();
  }

  double rth_frozen_magnitude() const {
    std::vector<double> mags;
    for (const auto& f : frozen_) mags.push_back(std::abs(f.value));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(r_ - 1), mags.end(),
                     std::greater<>());
    return mags[r_ - 1];
  }

  CheckResult check_block() {
    CheckResult out;
    auto es = block_eig();
    const auto m = es.eigenvalues().size();
    if (m < 2 && explored_ < n_) return out;
    const double beta = beta_.back();
    const double tol = 0.5 * bound_;

    struct Ritz {
      double value;
      double est;
      Eigen::Index idx;
      bool frozen;
      std::size_t fidx;
    };
    std::vector<Ritz> all;
    for (Eigen::Index i = 0; i < m; ++i)
      all.push_back({es.eigenvalues()(i), std::abs(beta * es.eigenvectors()(m - 1, i)), i, false, 0});
    for (std::size_t f = 0; f < frozen_.size(); ++f) all.push_back({frozen_[f].value, 0.0, 0, true, f});

    // Extremes of the live block must have settled.
    if (all[0].est > tol || all[static_cast<std::size_t>(m - 1)].est > tol) {
      out.worst_top = std::max(all[0].est, all[static_cast<std::size_t>(m - 1)].est);
      return out;
    }
    std::stable_sort(all.begin(), all.end(), [](const Ritz& x, const Ritz& y) {
      const double ax = std::abs(x.value), ay = std::abs(y.value);
      if (ax != ay) return ax > ay;
      return x.value > y.value;
    });
    if (all.size() < r_) return out;
    double worst = 0.0;
    for (std::size_t k = 0; k < r_; ++k) worst = std::max(worst, all[k].est);
    out.worst_top = worst;
    if (worst > tol) return out;

    live_.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      Vector v = ritz_vector(es.eigenvectors().col(i));
      v.normalize();
      live_.push_back({es.eigenvalues()(i), std::move(v), order_ + static_cast<std::size_t>(i)});
    }
    out.done = true;
    return out;
  }

  Spectrum assemble() {
    std::vector<Candidate> cands = frozen_;
    for (auto& c : live_) cands.push_back(std::move(c));
    std::stable_sort(cands.begin(), cands.end(), spectrum_before);
    if (cands.size() < r_)
      throw ConvergenceError("top_eigenpairs: fewer eigenpairs than requested", 0.0);
    Spectrum out;
    double worst = 0.0;
    for (std::size_t k = 0; k < r_; ++k) {
      EigenPair p{cands[k].value, std::move(cands[k].vector)};
      canonicalize_sign(p.vector);
      const double res = (a_.multiply(p.vector) - p.value * p.vector).norm();
      worst = std::max(worst, res);
      out.pairs.push_back(std::move(p));
    }
    if (worst > bound_)
      throw ConvergenceError("top_eigenpairs: residual " + std::to_string(worst) +
                                 " above bound " + std::to_string(bound_),
                             worst);
    return out;
  }

  const SymMatrix& a_;
  std::size_t n_;
  std::size_t r_;
  double bound_;
  std::size_t budget_;
  RngStream rng_;

  Matrix basis_;
  std::size_t explored_ = 0;
  std::size_t block_start_ = 0;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  std::vector<Candidate> frozen_;
  std::vector<Candidate> live_;
  std::size_t order_ = 0;
  std::size_t blocks_ = 0;
};

}  // namespace

Spectrum top_eigenpairs(const SymMatrix& a, std::size_t r, double tol) {
  return top_eigenpairs(a, r, EigOptions{tol, 10});
}

Spectrum top_eigenpairs(const SymMatrix& a, std::size_t r, const EigOptions& opts) {
  const std::size_t n = a.n();
  if (r < 1 || r > n) throw InputError("top_eigenpairs: r must lie in [1, n]");
  if (!(opts.tol > 0.0)) throw InputError("top_eigenpairs: tol must be positive");
  if (!a.dense().allFinite()) throw InputError("top_eigenpairs: non-finite entry");
  if (a.max_abs() == 0.0) {
    Spectrum out;
    for (std::size_t k = 0; k < r; ++k) {
      Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
      e(static_cast<Eigen::Index>(k)) = 1.0;
      out.pairs.push_back({0.0, std::move(e)});
    }
    return out;
  }
  return Lanczos(a, r, opts).run();
}

// ---------------------------------------------------------------------------
// Orthogonal matrices
// ---------------------------------------------------------------------------

OrthogonalMatrix::OrthogonalMatrix(Matrix h) : h_(std::move(h)) {
  if (h_.rows() != h_.cols() || h_.rows() == 0)
    throw InputError("OrthogonalMatrix: matrix must be square and non-empty");
}

double OrthogonalMatrix::orthogonality_defect() const {
  return (h_.transpose() * h_ - Matrix::Identity(h_.rows(), h_.cols())).cwiseAbs().maxCoeff();
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
  Matrix g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  return g;
}

Vector diagonal_signs(const Matrix& qr, Eigen::Index k) {
  Vector s(k);
  for (Eigen::Index i = 0; i < k; ++i) s(i) = qr(i, i) < 0.0 ? -1.0 : 1.0;
  return s;
}

}  // namespace

HaarRotation::HaarRotation(std::size_t n, RngStream& rng) {
  if (n == 0) throw InputError("HaarRotation: dimension must be >= 1");
  qr_.compute(gaussian_matrix(n, n, rng));
  signs_ = diagonal_signs(qr_.matrixQR(), static_cast<Eigen::Index>(n));
}

Vector HaarRotation::apply(const Vector& x) const {
  if (x.size() != signs_.size()) throw InputError("HaarRotation: dimension mismatch");
  Vector y = signs_.cwiseProduct(x);
  return qr_.householderQ() * y;
}

Vector HaarRotation::apply_transpose(const Vector& x) const {
  if (x.size() != signs_.size()) throw InputError("HaarRotation: dimension mismatch");
  Vector y = qr_.householderQ().transpose() * x;
  return signs_.cwiseProduct(y);
}

Matrix HaarRotation::apply(const Matrix& x) const {
  if (x.rows() != signs_.size()) throw InputError("HaarRotation: dimension mismatch");
  Matrix y = signs_.asDiagonal() * x;
  return qr_.householderQ() * y;
}

OrthogonalMatrix HaarRotation::to_matrix() const {
  Matrix q = qr_.householderQ();
  return OrthogonalMatrix(q * signs_.asDiagonal());
}

OrthogonalMatrix haar_orthogonal(std::size_t n, RngStream& rng) {
  return HaarRotation(n, rng).to_matrix();
}

Matrix haar_stiefel(std::size_t n, std::size_t r, RngStream& rng) {
  if (r < 1 || r > n) throw InputError("haar_stiefel: r must lie in [1, n]");
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, r, rng));
  const auto ri = static_cast<Eigen::Index>(r);
  Matrix q = qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(n), ri);
  return q * diagonal_signs(qr.matrixQR(), ri).asDiagonal();
}

SymMatrix conjugate(const SymMatrix& a, const OrthogonalMatrix& h) {
  if (a.n() != h.n()) throw InputError("conjugate: dimension mismatch");
  Matrix t = h.dense() * a.dense() * h.dense().transpose();
  return SymMatrix::symmetrize(t);
}

SymMatrix sign_conjugate(const SymMatrix& a, std::span<const double> q) {
  if (q.size() != a.n()) throw InputError("sign_conjugate: sign vector length mismatch");
  for (double s : q)
    if (s != 1.0 && s != -1.0) throw InputError("sign_conjugate: entries must be +1 or -1");
  const std::size_t n = a.n();
  return SymMatrix::from_upper(n, [&](std::size_t i, std::size_t j) { return q[i] * q[j] * a(i, j); });
}

}  // namespace spiked::linalg
