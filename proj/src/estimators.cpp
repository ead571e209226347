#include "spiked/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spiked/errors.hpp"

namespace spiked::est {

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

void require_unit(const Vector& v, const char* who) {
  if (std::abs(v.norm() - 1.0) > 1e-8) throw InputError(std::string(who) + ": vector must have unit norm");
}

std::size_t count_at_least(const Vector& u, double alpha) {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (std::abs(u(i)) >= alpha) ++c;
  return c;
}

bool gap_empty(const Vector& u, double alpha, double beta) {
  const double lo = (1.0 - beta) * alpha, hi = (1.0 + beta) * alpha;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double m = std::abs(u(i));
    if (lo < m && m < hi) return false;
  }
  return true;
}

SupportSelection build_selection(const Vector& u, double alpha, AlphaMode mode, bool relaxed) {
  SupportSelection sel;
  sel.alpha_hat = alpha;
  sel.mode = mode;
  sel.relaxed_gap = relaxed;
  sel.q = Vector::Ones(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) >= alpha) {
      sel.support.push_back(static_cast<std::size_t>(i));
      sel.q(i) = sign_of(u(i));
    }
  }
  return sel;
}

// x = Q 1_I, the signed support indicator.
Vector signed_indicator(const SupportSelection& sel, Eigen::Index n) {
  Vector x = Vector::Zero(n);
  for (auto i : sel.support) x(static_cast<Eigen::Index>(i)) = sel.q(static_cast<Eigen::Index>(i));
  return x;
}

void validate_lambda(double lambda_hat) {
  if (lambda_hat == 0.0 || !std::isfinite(lambda_hat))
    throw DomainError("refinement: lambda_hat must be finite and nonzero");
}

constexpr double kBoundTol = 1e-12;

// Applies the optional support-sum eigenvalue estimate. Returns the
// magnitude used for scaling, or nullopt when the estimate is unusable.
std::optional<double> scale_magnitude(double lambda_hat, bool from_support, const Vector& z, double s2,
                                      std::size_t support_size, std::size_t n, double sigma2) {
  if (!from_support) return std::abs(lambda_hat);
  if (!(s2 > 0.0)) return std::nullopt;
  const double est = (z.squaredNorm() - static_cast<double>(support_size) * static_cast<double>(n) * sigma2) / s2;
  if (!(est > 0.0) || !std::isfinite(est)) return std::nullopt;
  return est;
}

RefinedEstimate spectral_fallback(RefinedEstimate est, const Vector& u) {
  est.u_hat = u;
  est.refined_mask.assign(static_cast<std::size_t>(u.size()), false);
  est.fallback = Fallback::spectral_fallback;
  return est;
}

}  // namespace

// ---------------------------------------------------------------------------
// Alpha grid and support selection
// ---------------------------------------------------------------------------

double AlphaGrid::log_n() const { return std::log(static_cast<double>(n)); }

AlphaGrid alpha_grid(std::size_t n) {
  if (n < 8) throw DomainError("alpha_grid: n must be >= 8");
  const double ln = std::log(static_cast<double>(n));
  const double lln = std::log(ln);
  if (lln <= 0.1) throw DomainError("alpha_grid: log log n too small");
  AlphaGrid g;
  g.n = n;
  g.L = std::log(2.0 * static_cast<double>(n)) / lln;
  const auto top = static_cast<int>(std::ceil(g.L)) - 1;
  for (int l = 1; l <= top; ++l) g.values.push_back(std::pow(ln, -0.5 * l));
  g.values.push_back(std::pow(ln, -0.5 * g.L));
  return g;
}

double find_alpha(const Vector& v) {
  require_unit(v, "find_alpha");
  const AlphaGrid grid = alpha_grid(static_cast<std::size_t>(v.size()));
  const double log2n = grid.log_n() * grid.log_n();
  for (double a : grid.values) {
    const auto c = static_cast<double>(count_at_least(v, a));
    // Grid values make some bounds exact integers; keep roundoff from flipping a boundary case.
    if (1.0 / (a * a) * (1.0 + kBoundTol) >= c && c > 1.0 / (a * a * log2n) * (1.0 + kBoundTol)) return a;
  }
  throw NotFoundError("find_alpha: no grid value satisfies the cardinality bounds");
}

std::string_view to_string(AlphaMode m) { return m == AlphaMode::grid ? "grid" : "median"; }

AlphaMode parse_alpha_mode(std::string_view s) {
  if (s == "grid") return AlphaMode::grid;
  if (s == "median") return AlphaMode::median;
  throw InputError("unknown alpha mode '" + std::string(s) + "'");
}

SupportSelection select_support(const Vector& u, const AlphaGrid& grid, double beta, AlphaMode mode) {
  if (!(beta >= 0.0)) throw DomainError("select_support: beta must be >= 0");
  if (u.size() == 0) throw InputError("select_support: empty vector");
  if (mode == AlphaMode::median) {
    std::vector<double> mags(static_cast<std::size_t>(u.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(u(i));
    const std::size_t rank = mags.size() / 2;
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank), mags.end());
    return build_selection(u, mags[rank], mode, false);
  }

  if (grid.n != static_cast<std::size_t>(u.size())) throw InputError("select_support: grid built for another n");
  const double log2n = grid.log_n() * grid.log_n();
  auto scan = [&](bool with_gap) -> std::optional<double> {
    for (double a : grid.values) {
      const auto c = static_cast<double>(count_at_least(u, a));
      if (c < 1.0 / (a * a * log2n) * (1.0 - kBoundTol)) continue;
      if (with_gap && !gap_empty(u, a, beta)) continue;
      return a;
    }
    return std::nullopt;
  };
  if (auto a = scan(true)) return build_selection(u, *a, mode, false);
  if (auto a = scan(false)) return build_selection(u, *a, mode, true);
  throw NotFoundError("select_support: no grid value satisfies the cardinality condition");
}

SupportSelection select_support(const Vector& u, double beta, AlphaMode mode) {
  if (mode == AlphaMode::median) return select_support(u, AlphaGrid{}, beta, mode);
  return select_support(u, alpha_grid(static_cast<std::size_t>(u.size())), beta, mode);
}

// ---------------------------------------------------------------------------
// Scalar estimators
// ---------------------------------------------------------------------------

Debiased debias_lambda(double lambda_raw, std::size_t n, double sigma2) {
  if (!(sigma2 >= 0.0)) throw DomainError("debias_lambda: sigma2 must be >= 0");
  const double disc = lambda_raw * lambda_raw - 4.0 * static_cast<double>(n) * sigma2;
  Debiased out;
  out.clamped = disc < 0.0;
  const double root = out.clamped ? 0.0 : std::sqrt(disc);
  out.value = sign_of(lambda_raw) * 0.5 * (std::abs(lambda_raw) + root);
  return out;
}

double estimate_sigma2(const SymMatrix& y, const Spectrum& top, std::size_t r) {
  const std::size_t n = y.n();
  if (r < 1 || r > n) throw InputError("estimate_sigma2: r must lie in [1, n]");
  if (top.size() < r) throw InputError("estimate_sigma2: spectrum holds fewer than r pairs");
  linalg::Matrix resid = y.dense();
  for (std::size_t k = 0; k < r; ++k) {
    const auto& p = top[k];
    resid.noalias() -= p.value * p.vector * p.vector.transpose();
  }
  // sum over i <= j = (||R||_F^2 + sum_i R_ii^2) / 2
  const double total = 0.5 * (resid.squaredNorm() + resid.diagonal().squaredNorm());
  const double nn = static_cast<double>(n);
  return std::max(0.0, 2.0 / (nn * (nn + 1.0)) * total);
}

double estimate_sigma2(const SymMatrix& y, std::size_t r) {
  if (r < 1 || r > y.n()) throw InputError("estimate_sigma2: r must lie in [1, n]");
  return estimate_sigma2(y, linalg::top_eigenpairs(y, r), r);
}

double lambda_from_support(const SymMatrix& y_tilde, std::span<const std::size_t> support, double s_hat,
                           std::size_t n, double sigma2) {
  if (!(s_hat > 0.0)) throw DomainError("lambda_from_support: s_hat must be positive");
  if (support.empty()) throw InputError("lambda_from_support: empty support");
  if (y_tilde.n() != n) throw InputError("lambda_from_support: dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double row = 0.0;
    for (auto k : support) row += y_tilde(j, k);
    total += row * row;
  }
  return (total - static_cast<double>(support.size()) * static_cast<double>(n) * sigma2) / (s_hat * s_hat);
}

std::string_view to_string(EigEstimatorKind k) {
  switch (k) {
    case EigEstimatorKind::raw: return "raw";
    case EigEstimatorKind::debiased: return "debiased";
    case EigEstimatorKind::support_sum: return "support_sum";
  }
  return "?";
}

EigEstimatorKind parse_eig_estimator(std::string_view s) {
  if (s == "raw") return EigEstimatorKind::raw;
  if (s == "debiased") return EigEstimatorKind::debiased;
  if (s == "support_sum") return EigEstimatorKind::support_sum;
  throw InputError("unknown eigenvalue estimator '" + std::string(s) + "'");
}

std::string_view to_string(Fallback f) { return f == Fallback::none ? "none" : "spectral_fallback"; }

// ---------------------------------------------------------------------------
// Rank-one refinement
// ---------------------------------------------------------------------------

RefinedEstimate refine_rank1(const SymMatrix& y, double lambda_hat, const RefineOptions& opts) {
  const std::size_t r = std::max<std::size_t>(1, opts.sigma_rank);
  return refine_rank1(y, linalg::top_eigenpairs(y, opts.sigma2 ? 1 : r), lambda_hat, opts);
}

RefinedEstimate refine_rank1(const SymMatrix& y, const Spectrum& top, double lambda_hat, const RefineOptions& opts) {
  validate_lambda(lambda_hat);
  if (!(opts.beta >= 0.0)) throw DomainError("refine_rank1: beta must be >= 0");
  if (top.size() == 0) throw InputError("refine_rank1: empty spectrum");
  const std::size_t n = y.n();
  const double s = sign_of(lambda_hat);
  const Vector& u = top[0].vector;

  RefinedEstimate est;
  est.u_spectral = u;
  if (opts.sigma2) {
    est.sigma2_used = *opts.sigma2;
  } else {
    const std::size_t r = std::max<std::size_t>(1, opts.sigma_rank);
    est.sigma2_used = top.size() >= r ? estimate_sigma2(y, top, r) : estimate_sigma2(y, r);
  }
  if (!(est.sigma2_used >= 0.0)) throw DomainError("refine_rank1: sigma2 must be >= 0");

  est.selection = select_support(u, opts.beta, opts.mode);
  const Vector x = signed_indicator(est.selection, u.size());
  const Vector z = s * y.multiply(x);  // z_j = Q_jj sum_{k in I} Yt_jk
  const double s2 = x.dot(z);          // sum_{j,k in I} Yt_jk
  est.lambda_hat_used = lambda_hat;

  const auto mag = scale_magnitude(lambda_hat, opts.lambda_from_support, z, s2, est.selection.support.size(), n,
                                   est.sigma2_used);
  if (!(s2 > 0.0) || !mag) return spectral_fallback(std::move(est), u);
  est.lambda_hat_used = s * *mag;
  est.s_hat = std::sqrt(s2);

  const double tau = std::sqrt(est.sigma2_used) / *mag * std::log(static_cast<double>(n));
  const double denom = est.s_hat * std::sqrt(*mag);
  est.u_hat = u;
  est.refined_mask.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (std::abs(u(jj)) > tau) {
      est.u_hat(jj) = z(jj) / denom;
      est.refined_mask[j] = true;
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Rotated (rank-r) refinement
// ---------------------------------------------------------------------------

RefinedEstimate refine_rotated(const SymMatrix& y, const Spectrum& top_r, const HaarRotation& h, std::size_t k,
                               double lambda_hat_k, double sigma2, const RotatedOptions& opts) {
  validate_lambda(lambda_hat_k);
  if (k < 1 || k > top_r.size()) throw InputError("refine_rotated: k must lie in [1, r]");
  if (h.n() != y.n()) throw InputError("refine_rotated: rotation dimension mismatch");
  if (!(sigma2 >= 0.0)) throw DomainError("refine_rotated: sigma2 must be >= 0");
  if (!(opts.beta >= 0.0)) throw DomainError("refine_rotated: beta must be >= 0");
  const std::size_t n = y.n();
  const double s = sign_of(lambda_hat_k);

  RefinedEstimate est;
  est.sigma2_used = sigma2;
  est.lambda_hat_used = lambda_hat_k;
  const Vector& u = top_r[k - 1].vector;  // U_{.,k} = H^T Ut_{.,k}
  est.u_spectral = u;
  const Vector w = h.apply(u);  // Ut_{.,k}

  try {
    est.selection = select_support(w, opts.beta, opts.mode);
  } catch (const NotFoundError&) {
    return spectral_fallback(std::move(est), u);
  }
  const Vector x = signed_indicator(est.selection, w.size());
  const Vector back = h.apply_transpose(x);
  const Vector z = s * y.multiply(back);  // = H^T Q (row sums of Yt over I)
  const double s2 = back.dot(z);

  const auto mag = scale_magnitude(lambda_hat_k, opts.lambda_from_support, z, s2, est.selection.support.size(), n,
                                   sigma2);
  if (!(s2 > 0.0) || !mag) return spectral_fallback(std::move(est), u);
  est.lambda_hat_used = s * *mag;
  est.s_hat = std::sqrt(s2);

  const double tau = std::sqrt(sigma2) / *mag * std::log(static_cast<double>(n));
  const Vector refined = z / (est.s_hat * std::sqrt(*mag));  // H^T Q v
  est.refined_mask.assign(n, false);

  if (opts.basis == Step5Basis::original) {
    est.u_hat = u;
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (std::abs(u(jj)) > tau) {
        est.u_hat(jj) = refined(jj);
        est.refined_mask[j] = true;
      }
    }
  } else {
    const Vector qv = h.apply(refined);
    Vector rotated = w;
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (std::abs(w(jj)) > tau) {
        rotated(jj) = qv(jj);
        est.refined_mask[j] = true;
      }
    }
    est.u_hat = h.apply_transpose(rotated);
  }
  return est;
}

RefinedEstimate refine_rank_r(const SymMatrix& y, std::size_t r, std::size_t k, double lambda_hat_k,
                              std::optional<double> sigma2, RngStream& rng, const RotatedOptions& opts) {
  if (k < 1 || k > r || r > y.n()) throw InputError("refine_rank_r: need 1 <= k <= r <= n");
  validate_lambda(lambda_hat_k);
  const Spectrum top = linalg::top_eigenpairs(y, r);
  const double s2 = sigma2 ? *sigma2 : estimate_sigma2(y, top, r);
  const HaarRotation h(y.n(), rng);
  return refine_rotated(y, top, h, k, lambda_hat_k, s2, opts);
}

}  // namespace spiked::est
