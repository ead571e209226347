#include "spiked/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "spiked/errors.hpp"
#include "spiked/metrics.hpp"

namespace spiked::exp {

using linalg::Matrix;
using linalg::SymMatrix;
using linalg::Vector;

std::string_view to_string(SigmaMode m) { return m == SigmaMode::known ? "known" : "plugin"; }

std::string_view to_string(LambdaRule l) {
  switch (l) {
    case LambdaRule::sqrt_nlogn: return "sqrt_nlogn";
    case LambdaRule::ladder: return "ladder";
    case LambdaRule::explicit_list: return "explicit";
  }
  return "?";
}

SigmaMode parse_sigma_mode(std::string_view s) {
  if (s == "known") return SigmaMode::known;
  if (s == "plugin" || s == "auto") return SigmaMode::plugin;
  throw InputError("unknown sigma mode '" + std::string(s) + "'");
}

LambdaRule parse_lambda_rule(std::string_view s) {
  if (s == "sqrt_nlogn") return LambdaRule::sqrt_nlogn;
  if (s == "ladder") return LambdaRule::ladder;
  if (s == "explicit") return LambdaRule::explicit_list;
  throw InputError("unknown lambda rule '" + std::string(s) + "'");
}

std::string_view to_string(Method m) { return m == Method::spectral ? "spectral" : "refined"; }

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::none: return "none";
    case TrialStatus::spectral_fallback: return "spectral_fallback";
    case TrialStatus::failed: return "failed";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "spectral") return Method::spectral;
  if (s == "refined") return Method::refined;
  throw InputError("unknown method '" + std::string(s) + "'");
}

TrialStatus parse_status(std::string_view s) {
  if (s == "none") return TrialStatus::none;
  if (s == "spectral_fallback") return TrialStatus::spectral_fallback;
  if (s == "failed") return TrialStatus::failed;
  throw InputError("unknown fallback flag '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  if (n_grid.empty() || a_values.empty() || noise.empty() || scheme.empty())
    throw InputError("config: n, a, noise and scheme lists must be nonempty");
  for (auto n : n_grid)
    if (n < 8) throw InputError("config: every n must be >= 8");
  for (auto a : a_values)
    if (!(a > 0.0 && a < 1.0)) throw InputError("config: every a must lie in (0, 1)");
  if (r < 1) throw InputError("config: r must be >= 1");
  for (auto n : n_grid)
    if (r > n) throw InputError("config: r must not exceed n");
  if (!(beta >= 0.0)) throw InputError("config: beta must be >= 0");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("config: sigma2 must be positive");
  if (lambda_rule == LambdaRule::ladder && r < 2) throw InputError("config: the ladder rule needs r >= 2");
  if (lambda_rule == LambdaRule::explicit_list) {
    if (lambda_list.size() != r) throw InputError("config: explicit lambda list must have r entries");
    for (std::size_t k = 0; k < r; ++k) {
      if (!(lambda_list[k] != 0.0) || !std::isfinite(lambda_list[k]))
        throw InputError("config: lambda values must be finite and nonzero");
      if (k > 0 && std::abs(lambda_list[k]) > std::abs(lambda_list[k - 1]))
        throw InputError("config: lambda values must be sorted by |value| descending");
    }
  }
}

ExperimentConfig rankr_defaults(std::size_t r) {
  ExperimentConfig cfg;
  cfg.r = r;
  cfg.lambda_rule = LambdaRule::ladder;
  return cfg;
}

std::vector<Cell> cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (auto n : cfg.n_grid)
    for (auto a : cfg.a_values)
      for (auto noise : cfg.noise)
        for (auto scheme : cfg.scheme) out.push_back(Cell{n, a, noise, scheme});
  return out;
}

std::vector<double> lambda_star(const ExperimentConfig& cfg, std::size_t n) {
  switch (cfg.lambda_rule) {
    case LambdaRule::sqrt_nlogn: return std::vector<double>(cfg.r, model::default_spike_strength(n));
    case LambdaRule::ladder: return model::eigenvalue_ladder(n, cfg.r);
    case LambdaRule::explicit_list: return cfg.lambda_list;
  }
  throw InputError("lambda_star: unknown rule");
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, const Cell& cell, std::size_t trial) {
  const std::uint64_t cell_key =
      derive_seed({cell.n, std::bit_cast<std::uint64_t>(cell.a), static_cast<std::uint64_t>(cell.noise),
                   static_cast<std::uint64_t>(cell.scheme), cfg.r});
  return derive_seed({cfg.base_seed, cell_key, trial});
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

TrialRecord base_record(const ExperimentConfig& cfg, const Cell& cell, std::uint64_t seed, std::size_t k,
                        Method m) {
  TrialRecord rec;
  rec.seed = seed;
  rec.n = cell.n;
  rec.r = cfg.r;
  rec.k = k;
  rec.a = cell.a;
  rec.noise = cell.noise;
  rec.scheme = cell.scheme;
  rec.method = m;
  return rec;
}

double lambda_for_refinement(const ExperimentConfig& cfg, double raw, std::size_t n, double sigma2) {
  if (cfg.eig_estimator == est::EigEstimatorKind::debiased) return est::debias_lambda(raw, n, sigma2).value;
  return raw;  // support_sum keeps only the sign here and re-estimates inside the refinement
}

est::RotatedOptions rotated_options(const ExperimentConfig& cfg) {
  est::RotatedOptions o;
  o.mode = cfg.alpha_mode;
  o.beta = cfg.r == 1 ? cfg.beta : 0.0;
  o.lambda_from_support = cfg.eig_estimator == est::EigEstimatorKind::support_sum;
  o.basis = cfg.step5_basis;
  return o;
}

}  // namespace

TrialOutput run_trial(const ExperimentConfig& cfg, const Cell& cell, std::size_t trial) {
  const std::uint64_t seed = trial_seed(cfg, cell, trial);
  const std::size_t n = cell.n, r = cfg.r;
  const auto lambdas = lambda_star(cfg, n);
  TrialOutput out;

  auto failed_rows = [&]() {
    out.records.clear();
    for (std::size_t k = (r > 1 ? 0 : 1); k <= r; ++k)
      for (Method m : {Method::spectral, Method::refined}) {
        TrialRecord rec = base_record(cfg, cell, seed, k, m);
        if (k > 0) rec.lambda_true = lambdas[k - 1];
        rec.fallback = TrialStatus::failed;
        out.records.push_back(rec);
      }
  };

  try {
    RngStream rng(seed);
    model::SignalSpec spec{n, r, cell.a, cell.scheme, lambdas};
    const model::GroundTruth gt = model::gen_rank_r_basis(spec, rng);
    const SymMatrix w = model::gen_noise(n, model::NoiseSpec::make(cell.noise, cfg.sigma2), rng);
    const SymMatrix y = model::assemble_observation(gt, w);
    out.u_star = gt.u_star;

    const auto t0 = Clock::now();
    const linalg::Spectrum top = linalg::top_eigenpairs(y, r);
    const double sigma2_hat = cfg.sigma_mode == SigmaMode::plugin ? est::estimate_sigma2(y, top, r) : cfg.sigma2;
    const double spectral_ms = ms_since(t0);
    out.u_spectral = top.vectors();

    std::optional<linalg::HaarRotation> h;
    if (r > 1 || cfg.rotate) h.emplace(n, rng);

    out.u_refined = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
    std::vector<TrialRecord> rows;
    for (std::size_t k = 1; k <= r; ++k) {
      const auto t1 = Clock::now();
      const double raw = top[k - 1].value;
      const double lam = lambda_for_refinement(cfg, raw, n, sigma2_hat);
      est::RefinedEstimate e;
      TrialStatus status = TrialStatus::none;
      try {
        if (h) {
          e = est::refine_rotated(y, top, *h, k, lam, sigma2_hat, rotated_options(cfg));
        } else {
          est::RefineOptions o;
          o.beta = cfg.beta;
          o.mode = cfg.alpha_mode;
          o.sigma2 = sigma2_hat;
          o.lambda_from_support = cfg.eig_estimator == est::EigEstimatorKind::support_sum;
          e = est::refine_rank1(y, top, lam, o);
        }
        if (e.fallback == est::Fallback::spectral_fallback) status = TrialStatus::spectral_fallback;
      } catch (const NotFoundError&) {
        e = est::RefinedEstimate{};
        e.u_hat = top[k - 1].vector;
        e.lambda_hat_used = lam;
        status = TrialStatus::spectral_fallback;
      }
      const double refine_ms = ms_since(t1);
      out.u_refined.col(static_cast<Eigen::Index>(k - 1)) = e.u_hat;
      const Vector truth = gt.u_star.col(static_cast<Eigen::Index>(k - 1));

      TrialRecord spec_rec = base_record(cfg, cell, seed, k, Method::spectral);
      spec_rec.d_inf = metrics::d_inf(top[k - 1].vector, truth);
      spec_rec.lambda_true = lambdas[k - 1];
      spec_rec.lambda_hat = raw;
      spec_rec.sigma2_hat = sigma2_hat;
      if (r == 1) spec_rec.d_2inf = spec_rec.d_inf;
      if (cfg.timings) spec_rec.wall_ms = spectral_ms;

      TrialRecord ref_rec = base_record(cfg, cell, seed, k, Method::refined);
      ref_rec.d_inf = metrics::d_inf(e.u_hat, truth);
      ref_rec.lambda_true = lambdas[k - 1];
      ref_rec.lambda_hat = e.lambda_hat_used;
      ref_rec.sigma2_hat = sigma2_hat;
      if (status != TrialStatus::spectral_fallback || !e.selection.support.empty()) {
        ref_rec.alpha_hat = e.selection.alpha_hat;
        ref_rec.support_size = e.selection.support.size();
      }
      ref_rec.fallback = status;
      if (r == 1) ref_rec.d_2inf = ref_rec.d_inf;
      if (cfg.timings) ref_rec.wall_ms = spectral_ms + refine_ms;

      rows.push_back(std::move(spec_rec));
      rows.push_back(std::move(ref_rec));
    }

    if (r > 1) {
      for (Method m : {Method::spectral, Method::refined}) {
        const Matrix& est_u = m == Method::spectral ? out.u_spectral : out.u_refined;
        const auto rep = metrics::evaluate(est_u, gt.u_star, true);
        TrialRecord rec = base_record(cfg, cell, seed, 0, m);
        rec.d_inf = rep.d_inf;
        rec.d_2inf = rep.d_2inf;
        rec.sigma2_hat = sigma2_hat;
        if (m == Method::refined) {
          for (std::size_t i = 1; i < rows.size(); i += 2)
            if (rows[i].fallback != TrialStatus::none) rec.fallback = TrialStatus::spectral_fallback;
        }
        out.records.push_back(std::move(rec));
      }
    }
    out.records.insert(out.records.end(), rows.begin(), rows.end());
  } catch (const ConvergenceError&) {
    failed_rows();
  } catch (const InternalError&) {
    failed_rows();
  } catch (const DomainError&) {
    failed_rows();
  }
  return out;
}

namespace {

std::vector<TrialRecord> run_all(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto cs = cells(cfg);
  const std::size_t tasks = cs.size() * cfg.trials;
  std::vector<std::vector<TrialRecord>> slots(tasks);

  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(tasks, 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        slots[t] = run_trial(cfg, cs[t / cfg.trials], t % cfg.trials).records;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(tasks);
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<TrialRecord> out;
  for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

std::vector<TrialRecord> run_rank1(const ExperimentConfig& cfg) {
  if (cfg.r != 1) throw InputError("run_rank1: config must have r = 1");
  return run_all(cfg);
}

std::vector<TrialRecord> run_rankr(const ExperimentConfig& cfg) {
  if (cfg.r < 1) throw InputError("run_rankr: r must be >= 1");
  return run_all(cfg);
}

std::vector<TrialRecord> run(const ExperimentConfig& cfg) { return cfg.r == 1 ? run_rank1(cfg) : run_rankr(cfg); }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile: p must lie in [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, double level, std::size_t b,
                                       RngStream& rng) {
  if (samples.empty()) throw InputError("bootstrap_ci: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap_ci: level must lie in (0, 1)");
  if (b < 1) throw InputError("bootstrap_ci: need at least one resample");
  const std::size_t m = samples.size();
  std::vector<double> means(b);
  for (std::size_t i = 0; i < b; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += samples[rng.index(m)];
    means[i] = acc / static_cast<double>(m);
  }
  std::sort(means.begin(), means.end());
  return {quantile_sorted(means, (1.0 - level) / 2.0), quantile_sorted(means, (1.0 + level) / 2.0)};
}

std::vector<SummaryRow> summarize(std::span<const TrialRecord> records, std::string_view metric, double level,
                                  std::size_t b, std::uint64_t seed) {
  if (metric != "d_inf" && metric != "d_2inf") throw InputError("summarize: metric must be d_inf or d_2inf");
  using Key = std::tuple<std::size_t, std::uint64_t, int, int, int, std::size_t>;
  std::map<Key, std::size_t> index;
  std::vector<SummaryRow> rows;
  std::vector<std::vector<double>> values;
  for (const auto& rec : records) {
    const auto& v = metric == "d_inf" ? rec.d_inf : rec.d_2inf;
    if (!v) continue;
    const Key key{rec.n, std::bit_cast<std::uint64_t>(rec.a), static_cast<int>(rec.noise),
                  static_cast<int>(rec.scheme), static_cast<int>(rec.method), rec.k};
    auto [it, inserted] = index.emplace(key, rows.size());
    if (inserted) {
      SummaryRow row;
      row.n = rec.n;
      row.a = rec.a;
      row.noise = rec.noise;
      row.scheme = rec.scheme;
      row.method = rec.method;
      row.k = rec.k;
      rows.push_back(row);
      values.emplace_back();
    }
    values[it->second].push_back(*v);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto& xs = values[g];
    auto& row = rows[g];
    row.count = xs.size();
    row.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    RngStream rng(derive_seed({seed, g}));
    const auto [lo, hi] = bootstrap_ci(xs, level, b, rng);
    // The percentile interval can miss the sample mean for tiny skewed samples.
    row.ci_low = std::min(lo, row.mean);
    row.ci_high = std::max(hi, row.mean);
  }
  return rows;
}

SpotCheckResult spot_check(const ExperimentConfig& cfg, std::span<const TrialRecord> records, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("spot_check: fraction must lie in (0, 1]");
  const auto cs = cells(cfg);
  const std::size_t tasks = cs.size() * cfg.trials;
  SpotCheckResult res;
  if (tasks == 0) return res;
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::floor(1.0 / fraction)));

  // Records arrive grouped per task in task order; locate each task's block by seed.
  std::map<std::uint64_t, std::vector<const TrialRecord*>> by_seed;
  for (const auto& rec : records) by_seed[rec.seed].push_back(&rec);

  for (std::size_t t = 0; t < tasks; t += stride) {
    const Cell& cell = cs[t / cfg.trials];
    const std::size_t trial = t % cfg.trials;
    const TrialOutput again = run_trial(cfg, cell, trial);
    ++res.checked;
    const auto it = by_seed.find(trial_seed(cfg, cell, trial));
    bool ok = it != by_seed.end() && it->second.size() == again.records.size();
    for (std::size_t i = 0; ok && i < again.records.size(); ++i) {
      TrialRecord a = again.records[i], b = *it->second[i];
      a.wall_ms.reset();
      b.wall_ms.reset();
      ok = a == b;
      if (ok && a.k >= 1 && a.fallback == TrialStatus::none && again.u_star.size() > 0) {
        const auto col = static_cast<Eigen::Index>(a.k - 1);
        const Matrix& est_u = a.method == Method::spectral ? again.u_spectral : again.u_refined;
        ok = a.d_inf && metrics::d_inf(est_u.col(col), again.u_star.col(col)) == *a.d_inf;
      }
    }
    if (!ok) ++res.mismatched;
  }
  return res;
}

}  // namespace spiked::exp
