#include "spiked/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spiked/errors.hpp"

namespace spiked::model {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::haar: return "haar";
    case Scheme::bernoulli: return "bernoulli";
  }
  return "?";
}

std::string_view to_string(NoiseDist d) {
  switch (d) {
    case NoiseDist::gaussian: return "gaussian";
    case NoiseDist::laplacian: return "laplacian";
    case NoiseDist::rademacher: return "rademacher";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "haar") return Scheme::haar;
  if (s == "bernoulli") return Scheme::bernoulli;
  throw InputError("unknown signal scheme '" + std::string(s) + "'");
}

NoiseDist parse_noise(std::string_view s) {
  if (s == "gaussian") return NoiseDist::gaussian;
  if (s == "laplacian") return NoiseDist::laplacian;
  if (s == "rademacher") return NoiseDist::rademacher;
  throw InputError("unknown noise distribution '" + std::string(s) + "'");
}

void SignalSpec::validate() const {
  if (!(a > 0.0 && a < 1.0)) throw InputError("SignalSpec: a must lie in (0, 1)");
  if (r < 1 || r > n) throw InputError("SignalSpec: r must lie in [1, n]");
  if (n < 2) throw InputError("SignalSpec: n must be >= 2");
  if (eigenvalues.size() != r) throw InputError("SignalSpec: need exactly r eigenvalues");
  for (std::size_t k = 0; k < r; ++k) {
    if (eigenvalues[k] == 0.0 || !std::isfinite(eigenvalues[k]))
      throw InputError("SignalSpec: eigenvalues must be finite and nonzero");
    if (k > 0 && std::abs(eigenvalues[k]) > std::abs(eigenvalues[k - 1]))
      throw InputError("SignalSpec: eigenvalues must be sorted by |value| descending");
  }
}

SymMatrix GroundTruth::signal() const {
  Matrix m = u_star * Eigen::Map<const Vector>(lambda_star.data(), static_cast<Eigen::Index>(lambda_star.size()))
                           .asDiagonal() *
             u_star.transpose();
  return SymMatrix::symmetrize(m);
}

GroundTruth make_truth(Matrix u_star, std::vector<double> lambda_star, std::vector<std::size_t> spike_indices) {
  if (static_cast<std::size_t>(u_star.cols()) != lambda_star.size())
    throw InputError("make_truth: one eigenvalue per column required");
  GroundTruth gt;
  gt.mu = coherence(u_star);
  gt.kappa = std::abs(lambda_star.front()) / std::abs(lambda_star.back());
  gt.u_star = std::move(u_star);
  gt.lambda_star = std::move(lambda_star);
  gt.spike_indices = std::move(spike_indices);
  return gt;
}

NoiseSpec NoiseSpec::make(NoiseDist dist, double sigma2) {
  NoiseSpec s{dist, sigma2, dist == NoiseDist::laplacian ? 2.0 * sigma2 : sigma2};
  s.validate();
  return s;
}

void NoiseSpec::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("NoiseSpec: sigma2 must be positive");
  if (nu_w < sigma2) throw InputError("NoiseSpec: nu_w must be >= sigma2");
  if (dist == NoiseDist::gaussian && nu_w != sigma2)
    throw InputError("NoiseSpec: Gaussian noise has nu_w = sigma2");
}

Vector gen_spike_vector(std::size_t n, double a, Scheme scheme, std::size_t spike_index, RngStream& rng) {
  if (!(a > 0.0 && a < 1.0)) throw InputError("gen_spike_vector: a must lie in (0, 1)");
  if (n < 2) throw InputError("gen_spike_vector: n must be >= 2");
  if (spike_index >= n) throw InputError("gen_spike_vector: spike index out of range");

  const double rest = std::sqrt(1.0 - a * a);
  const auto m = static_cast<Eigen::Index>(n - 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vector g(m);
    if (scheme == Scheme::haar) {
      for (Eigen::Index i = 0; i < m; ++i) g(i) = rng.normal();
    } else {
      for (Eigen::Index i = 0; i < m; ++i) g(i) = rng.rademacher();
    }
    const double norm = g.norm();
    if (norm == 0.0) continue;
    g *= rest / norm;
    if (g.cwiseAbs().maxCoeff() > a) continue;

    Vector v(static_cast<Eigen::Index>(n));
    const auto s = static_cast<Eigen::Index>(spike_index);
    v.head(s) = g.head(s);
    v(s) = a;
    v.tail(m - s) = g.tail(m - s);
    return v;
  }
  throw InputError("gen_spike_vector: remainder exceeded a in 100 consecutive draws");
}

GroundTruth gen_rank_r_basis(const SignalSpec& spec, RngStream& rng) {
  spec.validate();
  const std::size_t n = spec.n, r = spec.r;

  // r distinct spike rows (partial Fisher-Yates).
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t k = 0; k < r; ++k) std::swap(rows[k], rows[k + rng.index(n - k)]);
  std::vector<std::size_t> spikes(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(r));

  Matrix u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  for (std::size_t k = 0; k < r; ++k) {
    bool accepted = false;
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      Vector v = gen_spike_vector(n, spec.a, spec.scheme, spikes[k], rng);
      if (k > 0) {
        auto prev = u.leftCols(static_cast<Eigen::Index>(k));
        v -= prev * (prev.transpose() * v);
        v -= prev * (prev.transpose() * v);
      }
      const double norm = v.norm();
      if (norm < 1e-8) continue;
      u.col(static_cast<Eigen::Index>(k)) = v / norm;
      accepted = true;
    }
    if (!accepted) throw InputError("gen_rank_r_basis: degenerate projection in 100 consecutive draws");
  }
  return make_truth(std::move(u), spec.eigenvalues, std::move(spikes));
}

SymMatrix gen_noise(std::size_t n, const NoiseSpec& spec, RngStream& rng) {
  spec.validate();
  const double sigma = std::sqrt(spec.sigma2);
  switch (spec.dist) {
    case NoiseDist::gaussian:
      return SymMatrix::from_upper(n, [&](std::size_t, std::size_t) { return sigma * rng.normal(); });
    case NoiseDist::laplacian: {
      const double b = sigma / std::sqrt(2.0);
      return SymMatrix::from_upper(n, [&](std::size_t, std::size_t) { return rng.laplace(b); });
    }
    case NoiseDist::rademacher:
      return SymMatrix::from_upper(n, [&](std::size_t, std::size_t) { return sigma * rng.rademacher(); });
  }
  throw InputError("gen_noise: unknown distribution");
}

SymMatrix assemble_observation(const GroundTruth& gt, const SymMatrix& w) {
  if (gt.n() != w.n()) throw InputError("assemble_observation: dimension mismatch");
  return gt.signal() + w;
}

double coherence(const Matrix& u) {
  if (u.rows() == 0 || u.cols() == 0 || u.cols() > u.rows())
    throw InputError("coherence: U must be n x r with 1 <= r <= n");
  const Matrix gram = u.transpose() * u;
  const double defect = (gram - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
  if (defect > 1e-8) throw InputError("coherence: columns are not orthonormal");
  const double n = static_cast<double>(u.rows()), r = static_cast<double>(u.cols());
  return n / r * u.rowwise().squaredNorm().maxCoeff();
}

double default_spike_strength(std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::sqrt(nn * std::log(nn));
}

std::vector<double> eigenvalue_ladder(std::size_t n, std::size_t r) {
  if (r < 1) throw InputError("eigenvalue_ladder: r must be >= 1");
  const double base = default_spike_strength(n);
  std::vector<double> out(r);
  for (std::size_t k = 1; k <= r; ++k) out[k - 1] = 0.5 * static_cast<double>(r - k + 2) * base;
  for (std::size_t k = 1; k < r; ++k) {
    const double gap = out[k - 1] - out[k];
    if (std::abs(gap - 0.5 * base) > 1e-9 * std::max(1.0, base))
      throw InternalError("eigenvalue_ladder: ladder gap drifted");
  }
  return out;
}

}  // namespace spiked::model
