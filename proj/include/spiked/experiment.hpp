#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spiked/estimators.hpp"
#include "spiked/model.hpp"
#include "spiked/rng.hpp"

namespace spiked::exp {

enum class SigmaMode { known, plugin };
enum class LambdaRule { sqrt_nlogn, ladder, explicit_list };

std::string_view to_string(SigmaMode m);
std::string_view to_string(LambdaRule l);
SigmaMode parse_sigma_mode(std::string_view s);
LambdaRule parse_lambda_rule(std::string_view s);

struct ExperimentConfig {
  std::vector<std::size_t> n_grid{256, 512, 1024, 2048};
  std::vector<double> a_values{0.3, 0.55, 0.8};
  std::vector<model::NoiseDist> noise{model::NoiseDist::gaussian};
  std::vector<model::Scheme> scheme{model::Scheme::haar};
  std::size_t r = 1;
  std::size_t trials = 20;
  std::uint64_t base_seed = 1;
  est::AlphaMode alpha_mode = est::AlphaMode::median;
  double beta = 0.0;
  est::EigEstimatorKind eig_estimator = est::EigEstimatorKind::debiased;
  SigmaMode sigma_mode = SigmaMode::plugin;
  double sigma2 = 1.0;  // noise variance used for generation (and by known mode)
  LambdaRule lambda_rule = LambdaRule::sqrt_nlogn;
  std::vector<double> lambda_list;  // used by explicit_list, r entries
  /// Rank-one runs conjugate by a Haar rotation before selecting the support.
  bool rotate = true;
  est::Step5Basis step5_basis = est::Step5Basis::original;
  std::size_t threads = 0;  // 0 = hardware concurrency
  bool timings = false;

  /// Throws InputError on any invalid field.
  void validate() const;
};

/// Preset used by `simulate rankr`: ladder eigenvalues and grid-free defaults.
ExperimentConfig rankr_defaults(std::size_t r);

enum class Method { spectral, refined };
enum class TrialStatus { none, spectral_fallback, failed };

std::string_view to_string(Method m);
std::string_view to_string(TrialStatus s);
Method parse_method(std::string_view s);
TrialStatus parse_status(std::string_view s);

struct TrialRecord {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t r = 1;
  std::size_t k = 1;  // 0 marks the whole-basis row of a rank-r trial
  double a = 0.0;
  model::NoiseDist noise = model::NoiseDist::gaussian;
  model::Scheme scheme = model::Scheme::haar;
  Method method = Method::spectral;
  std::optional<double> d_inf;
  std::optional<double> d_2inf;
  std::optional<double> lambda_true;
  std::optional<double> lambda_hat;
  std::optional<double> sigma2_hat;
  std::optional<double> alpha_hat;
  std::optional<std::size_t> support_size;
  TrialStatus fallback = TrialStatus::none;
  std::optional<double> wall_ms;

  bool operator==(const TrialRecord&) const = default;
};

struct Cell {
  std::size_t n;
  double a;
  model::NoiseDist noise;
  model::Scheme scheme;
};

/// Cells in sweep order: n, then a, then noise, then scheme.
std::vector<Cell> cells(const ExperimentConfig& cfg);

/// Planted eigenvalues for dimension n under the configured rule.
std::vector<double> lambda_star(const ExperimentConfig& cfg, std::size_t n);

/// Seed of one trial: a function of the base seed, the cell's own parameters
/// and the trial index only, so adding or removing cells never moves another
/// cell's draws.
std::uint64_t trial_seed(const ExperimentConfig& cfg, const Cell& cell, std::size_t trial);

/// Everything one trial produced, including the estimates behind the records.
struct TrialOutput {
  std::vector<TrialRecord> records;
  linalg::Matrix u_star;
  linalg::Matrix u_spectral;
  linalg::Matrix u_refined;
};

/// Runs a single trial. Numerical failures are folded into the records.
TrialOutput run_trial(const ExperimentConfig& cfg, const Cell& cell, std::size_t trial);

/// Rank-one sweep (cfg.r must be 1).
std::vector<TrialRecord> run_rank1(const ExperimentConfig& cfg);
/// Rank-r sweep (cfg.r >= 2 for the ladder rule); adds k = 0 whole-basis rows.
std::vector<TrialRecord> run_rankr(const ExperimentConfig& cfg);
/// Dispatches on cfg.r.
std::vector<TrialRecord> run(const ExperimentConfig& cfg);

/// Linear-interpolation quantile of sorted data: position p (n - 1).
double quantile_sorted(std::span<const double> sorted, double p);

/// Percentile bootstrap interval for the mean.
std::pair<double, double> bootstrap_ci(std::span<const double> samples, double level, std::size_t b, RngStream& rng);

struct SummaryRow {
  std::size_t n = 0;
  double a = 0.0;
  model::NoiseDist noise = model::NoiseDist::gaussian;
  model::Scheme scheme = model::Scheme::haar;
  Method method = Method::spectral;
  std::size_t k = 1;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t count = 0;
};

/// Groups by (n, a, noise, scheme, method, k) in first-appearance order and
/// bootstraps the mean of `metric` ("d_inf" or "d_2inf"). Records without
/// the metric are skipped; groups left empty are dropped.
std::vector<SummaryRow> summarize(std::span<const TrialRecord> records, std::string_view metric, double level,
                                  std::size_t b, std::uint64_t seed);

struct SpotCheckResult {
  std::size_t checked = 0;
  std::size_t mismatched = 0;
};

/// Re-runs about `fraction` of the trials (at least one when any exist),
/// recomputes d_inf from the regenerated estimates and compares every
/// record field with the stored ones (wall_ms excluded).
SpotCheckResult spot_check(const ExperimentConfig& cfg, std::span<const TrialRecord> records, double fraction = 0.01);

}  // namespace spiked::exp
