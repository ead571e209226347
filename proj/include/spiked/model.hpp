#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spiked/linalg.hpp"
#include "spiked/rng.hpp"

namespace spiked::model {

using linalg::Matrix;
using linalg::SymMatrix;
using linalg::Vector;

/// How the non-spike entries of a planted eigenvector are drawn.
enum class Scheme { haar, bernoulli };

enum class NoiseDist { gaussian, laplacian, rademacher };

std::string_view to_string(Scheme s);
std::string_view to_string(NoiseDist d);
Scheme parse_scheme(std::string_view s);
NoiseDist parse_noise(std::string_view s);

struct SignalSpec {
  std::size_t n = 0;
  std::size_t r = 1;
  double a = 0.8;
  Scheme scheme = Scheme::haar;
  std::vector<double> eigenvalues;

  /// Throws InputError when any field invariant fails.
  void validate() const;
};

struct GroundTruth {
  Matrix u_star;                         // n x r, orthonormal columns
  std::vector<double> lambda_star;       // r values, |.| descending
  std::vector<std::size_t> spike_indices;
  double mu = 0.0;
  double kappa = 1.0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(u_star.rows()); }
  std::size_t r() const noexcept { return static_cast<std::size_t>(u_star.cols()); }
  /// U* Lambda* U*^T.
  SymMatrix signal() const;
};

/// Builds a GroundTruth from explicit factors; computes mu and kappa.
GroundTruth make_truth(Matrix u_star, std::vector<double> lambda_star,
                       std::vector<std::size_t> spike_indices = {});

struct NoiseSpec {
  NoiseDist dist = NoiseDist::gaussian;
  double sigma2 = 1.0;
  double nu_w = 1.0;

  /// Default subgaussian proxy: sigma2 for Gaussian and Rademacher, 2 sigma2 for Laplacian.
  static NoiseSpec make(NoiseDist dist, double sigma2 = 1.0);
  void validate() const;
};

/// Unit vector with v[spike_index] = a and the other n-1 entries drawn per
/// `scheme`, rescaled to carry the remaining mass 1 - a^2. A draw whose
/// remainder has an entry larger than a in magnitude is redrawn (100 tries).
Vector gen_spike_vector(std::size_t n, double a, Scheme scheme, std::size_t spike_index, RngStream& rng);

/// Rank-r planted basis: r spiked draws with distinct spike rows, each
/// projected against the accepted columns and renormalized.
GroundTruth gen_rank_r_basis(const SignalSpec& spec, RngStream& rng);

/// Symmetric noise; the upper triangle (diagonal included) is i.i.d. with variance sigma2.
SymMatrix gen_noise(std::size_t n, const NoiseSpec& spec, RngStream& rng);

/// Y = U* Lambda* U*^T + W.
SymMatrix assemble_observation(const GroundTruth& gt, const SymMatrix& w);

/// (n/r) max_i ||U_{i,.}||^2. Throws InputError unless U^T U = I within 1e-8.
double coherence(const Matrix& u);

/// lambda*_k = 0.5 (r - k + 2) sqrt(n log n), k = 1..r (consecutive gaps 0.5 sqrt(n log n)).
std::vector<double> eigenvalue_ladder(std::size_t n, std::size_t r);

/// sqrt(n log n).
double default_spike_strength(std::size_t n);

}  // namespace spiked::model
