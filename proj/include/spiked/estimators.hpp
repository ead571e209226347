#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spiked/linalg.hpp"
#include "spiked/rng.hpp"

namespace spiked::est {

using linalg::HaarRotation;
using linalg::Spectrum;
using linalg::SymMatrix;
using linalg::Vector;

/// Geometric threshold ladder (log n)^{-l/2}, l = 1..ceil(L)-1, closed by
/// (log n)^{-L/2} = 1/sqrt(2n), where L = log(2n) / log log n. Natural logs.
struct AlphaGrid {
  std::size_t n = 0;
  double L = 0.0;
  std::vector<double> values;  // strictly descending

  double log_n() const;
};

/// Throws DomainError for n < 8.
AlphaGrid alpha_grid(std::size_t n);

/// Largest grid value a with 1/a^2 >= #{i : |v_i| >= a} > 1/(a^2 log^2 n).
/// Throws NotFoundError when no grid value qualifies.
double find_alpha(const Vector& v);

enum class AlphaMode { grid, median };
std::string_view to_string(AlphaMode m);
AlphaMode parse_alpha_mode(std::string_view s);

struct SupportSelection {
  double alpha_hat = 0.0;
  std::vector<std::size_t> support;  // {i : |u_i| >= alpha_hat}, ascending
  Vector q;                          // sign(u_k) on the support, +1 elsewhere
  AlphaMode mode = AlphaMode::grid;
  bool relaxed_gap = false;
};

/// Chooses the threshold and builds the support and sign pattern.
///
/// Grid mode scans the grid from the largest value down and returns the
/// first a with |I| >= 1/(a^2 log^2 n) and no |u_i| strictly inside
/// ((1-beta) a, (1+beta) a). If nothing passes both, the scan is repeated
/// on the cardinality condition alone and `relaxed_gap` is set; if that
/// also fails, NotFoundError. Median mode thresholds at the entry of rank
/// floor(n/2) (0-based) of the sorted |u|, so |I| = ceil(n/2) for distinct
/// magnitudes; no grid is needed and beta is ignored.
SupportSelection select_support(const Vector& u, const AlphaGrid& grid, double beta, AlphaMode mode);
SupportSelection select_support(const Vector& u, double beta, AlphaMode mode);

struct Debiased {
  double value = 0.0;
  bool clamped = false;  // lambda^2 < 4 n sigma2; the root was taken as 0
};

/// sign(l) (|l| + sqrt(max(l^2 - 4 n sigma2, 0))) / 2.
Debiased debias_lambda(double lambda_raw, std::size_t n, double sigma2);

/// Plug-in noise variance: 2/(n(n+1)) sum_{i<=j} (Y_ij - M_ij)^2 with M the
/// rank-r truncation of Y's spectrum.
double estimate_sigma2(const SymMatrix& y, std::size_t r);
/// Same, with the top-r spectrum supplied (the first r pairs of `top` are used).
double estimate_sigma2(const SymMatrix& y, const Spectrum& top, std::size_t r);

/// (sum_j (sum_{k in I} Yt_jk)^2 - |I| n sigma2) / s_hat^2.
/// Throws DomainError when s_hat <= 0 and InputError on an empty support.
double lambda_from_support(const SymMatrix& y_tilde, std::span<const std::size_t> support, double s_hat,
                           std::size_t n, double sigma2);

enum class EigEstimatorKind { raw, debiased, support_sum };
std::string_view to_string(EigEstimatorKind k);
EigEstimatorKind parse_eig_estimator(std::string_view s);

enum class Fallback { none, spectral_fallback };
std::string_view to_string(Fallback f);

struct RefinedEstimate {
  Vector u_hat;
  double lambda_hat_used = 0.0;
  SupportSelection selection;
  double s_hat = 0.0;
  std::vector<bool> refined_mask;  // true where the refined branch was taken
  Fallback fallback = Fallback::none;
  double sigma2_used = 0.0;
  Vector u_spectral;  // the spectral eigenvector the refinement started from
};

struct RefineOptions {
  double beta = 0.0;
  AlphaMode mode = AlphaMode::grid;
  /// Known noise variance; empty means the plug-in estimate.
  std::optional<double> sigma2;
  /// Rank used by the plug-in estimate.
  std::size_t sigma_rank = 1;
  /// Replace the supplied lambda_hat (only its sign is kept) by the
  /// support-sum estimate computed from the selected support.
  bool lambda_from_support = false;
};

/// Coherence-free refinement of the leading eigenvector.
///
/// Works on sign(lambda_hat) * Y. With u the top eigenvector, the support
/// I and signs Q from select_support, and Yt = Q Y Q:
///   S = sqrt(sum_{j,k in I} Yt_jk),  v_j = sum_{k in I} Yt_jk / (S sqrt|lambda_hat|),
///   u_hat_j = u_j if |u_j| <= (sigma/|lambda_hat|) log n, else Q_jj v_j.
/// A nonpositive support sum yields the spectral vector with
/// fallback = spectral_fallback. Throws DomainError for lambda_hat = 0 or
/// beta < 0, and propagates NotFoundError from support selection.
RefinedEstimate refine_rank1(const SymMatrix& y, double lambda_hat, const RefineOptions& opts = {});
/// Same, reusing an already computed spectrum of Y (pair 0 must be the top pair).
RefinedEstimate refine_rank1(const SymMatrix& y, const Spectrum& top, double lambda_hat,
                             const RefineOptions& opts = {});

/// Which coordinates the final entrywise choice is made in for the rotated
/// refinement: the original basis (u_hat_j compares the spectral U_{j,k})
/// or the rotated one (rotate back afterwards).
enum class Step5Basis { original, rotated };

struct RotatedOptions {
  AlphaMode mode = AlphaMode::grid;
  double beta = 0.0;
  std::optional<double> sigma2;
  bool lambda_from_support = false;
  Step5Basis basis = Step5Basis::original;
};

/// Rank-r refinement of eigenvector k (1-based) after a Haar rotation H.
///
/// Ut = top-r eigenvectors of H Y H^T, Q = diag(sign(Ut_{.,k})),
/// Yt = Q H Y H^T Q, support from the cardinality condition on |Ut_{.,k}|,
/// S and v as in the rank-one case with lambda_hat_k, U = H^T Ut, and
///   u_hat_j = U_{j,k} if |U_{j,k}| <= (sigma/|lambda_hat_k|) log n, else (H^T Q v)_j.
/// Support failure or a nonpositive support sum falls back to U_{.,k}.
RefinedEstimate refine_rank_r(const SymMatrix& y, std::size_t r, std::size_t k, double lambda_hat_k,
                              std::optional<double> sigma2, RngStream& rng, const RotatedOptions& opts = {});

/// The same refinement with the rotation and the top-r spectrum of Y
/// supplied. The eigenvectors of H Y H^T are taken as H times those of Y,
/// and every sum over Yt is evaluated as H^T / Y matrix-vector products,
/// so no n x n product is ever formed. `sigma2` must be resolved already.
RefinedEstimate refine_rotated(const SymMatrix& y, const Spectrum& top_r, const HaarRotation& h, std::size_t k,
                               double lambda_hat_k, double sigma2, const RotatedOptions& opts);

}  // namespace spiked::est
