#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "spiked/entropy.hpp"
#include "spiked/errors.hpp"
#include "spiked/estimators.hpp"
#include "spiked/experiment.hpp"
#include "spiked/report.hpp"

namespace spiked::cli {

namespace {

struct SimulateArgs {
  std::vector<std::size_t> n;
  std::vector<double> a;
  std::vector<std::string> noise, scheme;
  std::size_t trials = 0, r = 1, threads = 0, bootstrap = 1000;
  std::uint64_t seed = 0;
  std::string alpha_mode, sigma, lambda, eig, step5, config;
  double beta = 0.0, sigma2 = 1.0, level = 0.95;
  std::string out = "-", summary, meta;
  bool timings = false, no_rotate = false, spot = false;
};

bool given(const CLI::Option* o) { return o && o->count() > 0; }

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    report::write_file(path, content);
  }
}

std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InputError("bad number '" + tok + "' in list");
    }
  }
  return out;
}

exp::ExperimentConfig build_config(const SimulateArgs& s, const CLI::App& cmd, bool rankr) {
  exp::ExperimentConfig cfg = rankr ? exp::rankr_defaults(2) : exp::ExperimentConfig{};
  if (!s.config.empty()) report::apply_config_file(s.config, cfg);
  auto opt = [&](const char* name) { return given(cmd.get_option_no_throw(name)); };

  if (opt("--n")) cfg.n_grid = s.n;
  if (opt("--a")) cfg.a_values = s.a;
  if (opt("--noise")) {
    cfg.noise.clear();
    for (const auto& x : s.noise) cfg.noise.push_back(model::parse_noise(x));
  }
  if (opt("--scheme")) {
    cfg.scheme.clear();
    for (const auto& x : s.scheme) cfg.scheme.push_back(model::parse_scheme(x));
  }
  if (opt("--trials")) cfg.trials = s.trials;
  if (opt("--seed")) cfg.base_seed = s.seed;
  if (opt("--alpha-mode")) cfg.alpha_mode = est::parse_alpha_mode(s.alpha_mode);
  if (opt("--beta")) cfg.beta = s.beta;
  if (opt("--sigma")) cfg.sigma_mode = exp::parse_sigma_mode(s.sigma);
  if (opt("--sigma2")) cfg.sigma2 = s.sigma2;
  if (opt("--eig")) cfg.eig_estimator = est::parse_eig_estimator(s.eig);
  if (opt("--threads")) cfg.threads = s.threads;
  if (opt("--timings")) cfg.timings = true;
  if (opt("--no-rotate")) cfg.rotate = false;
  if (opt("--step5")) {
    if (s.step5 == "original") cfg.step5_basis = est::Step5Basis::original;
    else if (s.step5 == "rotated") cfg.step5_basis = est::Step5Basis::rotated;
    else throw InputError("--step5 must be 'original' or 'rotated'");
  }
  if (rankr && opt("--r")) cfg.r = s.r;
  if (!rankr) cfg.r = 1;
  if (opt("--lambda")) {
    if (s.lambda == "ladder" || s.lambda == "sqrt_nlogn") {
      cfg.lambda_rule = exp::parse_lambda_rule(s.lambda);
    } else {
      cfg.lambda_rule = exp::LambdaRule::explicit_list;
      cfg.lambda_list = parse_real_list(s.lambda);
    }
  }
  if (!rankr && cfg.lambda_rule == exp::LambdaRule::ladder) cfg.lambda_rule = exp::LambdaRule::sqrt_nlogn;
  cfg.validate();
  return cfg;
}

void add_simulate_options(CLI::App* cmd, SimulateArgs& s, bool rankr) {
  cmd->add_option("--n", s.n, "Dimensions, comma separated")->delimiter(',');
  cmd->add_option("--a", s.a, "Spike magnitudes in (0,1), comma separated")->delimiter(',');
  cmd->add_option("--noise", s.noise, "gaussian, laplacian, rademacher")->delimiter(',');
  cmd->add_option("--scheme", s.scheme, "haar, bernoulli")->delimiter(',');
  cmd->add_option("--trials", s.trials, "Trials per cell");
  cmd->add_option("--seed", s.seed, "Base seed");
  cmd->add_option("--alpha-mode", s.alpha_mode, "grid or median");
  cmd->add_option("--beta", s.beta, "Gap parameter (grid mode)");
  cmd->add_option("--sigma", s.sigma, "plugin (auto) or known");
  cmd->add_option("--sigma2", s.sigma2, "Noise variance");
  cmd->add_option("--eig", s.eig, "Eigenvalue estimator: raw, debiased, support_sum");
  cmd->add_option("--lambda", s.lambda, rankr ? "ladder, sqrt_nlogn or an explicit list" : "sqrt_nlogn or a value");
  if (rankr) cmd->add_option("--r", s.r, "Rank");
  cmd->add_option("--step5", s.step5, "Basis of the final entrywise choice: original or rotated");
  cmd->add_flag("--no-rotate", s.no_rotate, "Rank one: skip the Haar conjugation");
  cmd->add_option("--threads", s.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--config", s.config, "JSON config file; flags override it");
  cmd->add_option("--out", s.out, "Trial CSV path ('-' for stdout)");
  cmd->add_option("--summary", s.summary, "Summary CSV path (bootstrap CIs)");
  cmd->add_option("--meta", s.meta, "Run metadata JSON path");
  cmd->add_option("--bootstrap", s.bootstrap, "Bootstrap resamples for --summary");
  cmd->add_option("--level", s.level, "Confidence level for --summary");
  cmd->add_flag("--timings", s.timings, "Record wall_ms (breaks byte-identical reruns)");
  cmd->add_flag("--spot-check", s.spot, "Re-run 1% of trials and compare");
}

int do_simulate(const SimulateArgs& s, const CLI::App& cmd, bool rankr, std::ostream& out, std::ostream& err) {
  const auto cfg = build_config(s, cmd, rankr);
  const auto records = exp::run(cfg);
  emit(s.out, report::emit_csv(records), out);
  if (!s.summary.empty()) {
    std::ostringstream os;
    report::emit_summary_csv(os, exp::summarize(records, "d_inf", s.level, s.bootstrap, cfg.base_seed), "d_inf");
    report::emit_summary_csv(os, exp::summarize(records, "d_2inf", s.level, s.bootstrap, cfg.base_seed), "d_2inf",
                             false);
    emit(s.summary, os.str(), out);
  }
  if (!s.meta.empty()) emit(s.meta, report::metadata_json(cfg, s.level, s.bootstrap), out);
  if (s.spot) {
    const auto res = exp::spot_check(cfg, records);
    err << fmt::format("spot check: {} trials re-run, {} mismatched\n", res.checked, res.mismatched);
    if (res.mismatched) return 3;
  }
  return 0;
}

struct EstimateArgs {
  std::string input, sigma = "auto", json_out, alpha_mode = "grid";
  std::size_t r = 1, k = 0;
  std::uint64_t seed = 0;
  double beta = 0.0;
  bool rotate = false;
};

int do_estimate(const EstimateArgs& a, std::ostream& out) {
  const auto y = report::read_matrix_file(a.input);
  const std::size_t n = y.n();
  if (a.r < 1 || a.r > n) throw InputError("--r must lie in [1, n]");
  if (a.k > a.r) throw InputError("--k must lie in [0, r]");
  const auto top = linalg::top_eigenpairs(y, a.r);

  double sigma2 = 0.0;
  if (a.sigma == "auto" || a.sigma == "plugin") {
    sigma2 = est::estimate_sigma2(y, top, a.r);
  } else {
    const auto v = parse_real_list(a.sigma);
    if (v.size() != 1 || !(v[0] >= 0.0)) throw InputError("--sigma must be 'auto' or a nonnegative sigma^2");
    sigma2 = v[0];
  }
  const auto mode = est::parse_alpha_mode(a.alpha_mode);

  nlohmann::json j;
  j["n"] = n;
  j["r"] = a.r;
  j["sigma2_hat"] = sigma2;
  j["columns"] = nlohmann::json::array();

  RngStream rng(derive_seed({a.seed, n, a.r}));
  std::optional<linalg::HaarRotation> h;
  if (a.r > 1 || a.rotate) h.emplace(n, rng);

  for (std::size_t k = 1; k <= a.r; ++k) {
    if (a.k != 0 && k != a.k) continue;
    const double raw = top[k - 1].value;
    const auto deb = est::debias_lambda(raw, n, sigma2);
    nlohmann::json c;
    c["k"] = k;
    c["lambda_raw"] = raw;
    c["lambda_hat_c"] = deb.value;
    c["clamped"] = deb.clamped;
    if (deb.value == 0.0) throw DomainError("debiased eigenvalue is zero");
    est::RefinedEstimate e;
    if (h) {
      est::RotatedOptions o;
      o.mode = mode;
      o.beta = a.r == 1 ? a.beta : 0.0;
      e = est::refine_rotated(y, top, *h, k, deb.value, sigma2, o);
    } else {
      est::RefineOptions o;
      o.mode = mode;
      o.beta = a.beta;
      o.sigma2 = sigma2;
      e = est::refine_rank1(y, top, deb.value, o);
    }
    c["alpha_hat"] = e.selection.alpha_hat;
    c["support_size"] = e.selection.support.size();
    c["relaxed_gap"] = e.selection.relaxed_gap;
    c["fallback"] = std::string(est::to_string(e.fallback));
    c["refined_entries"] = std::count(e.refined_mask.begin(), e.refined_mask.end(), true);
    c["u_hat"] = std::vector<double>(e.u_hat.data(), e.u_hat.data() + e.u_hat.size());
    c["u_spectral"] = std::vector<double>(e.u_spectral.data(), e.u_spectral.data() + e.u_spectral.size());
    j["columns"].push_back(c);
  }
  emit(a.json_out, j.dump(2) + "\n", out);
  return 0;
}

struct EntropyArgs {
  std::size_t n = 0, r = 1, s = 1, cap = 1'000'000, draws = 1000, budget = 1000;
  double mu = 1.0, delta = 0.25;
  std::uint64_t seed = 0;
  bool verify = false, list = false;
};

int do_cover(const EntropyArgs& a, std::ostream& out) {
  const auto cover = entropy::enumerate_cover_T(a.n, a.r, a.s, a.cap);
  out << fmt::format("n={} r={} s={} elements={} bound={}\n", a.n, a.r, a.s, cover.size(),
                     report::format_real(entropy::cover_upper_bound(a.n, a.r, a.s)));
  if (a.list) {
    for (std::size_t i = 0; i < cover.size(); ++i) {
      const auto& z = cover.counts(i);
      std::string line;
      for (std::size_t j = 0; j < z.size(); ++j) line += (j ? " " : "") + std::to_string(z[j]);
      out << line << '\n';
    }
  }
  if (a.verify) {
    RngStream rng(a.seed);
    const auto chk = entropy::verify_exterior_cover(cover, a.draws, rng);
    out << fmt::format("verify: draws={} misses={} worst_linf={} bound={}\n", chk.draws, chk.misses,
                       report::format_real(chk.worst_error),
                       report::format_real(1.0 / std::sqrt(static_cast<double>(a.s))));
    if (chk.misses) return 3;
  }
  return 0;
}

int do_pack(const EntropyArgs& a, std::ostream& out) {
  RngStream rng(a.seed);
  const auto res = entropy::greedy_packing(a.n, a.r, a.mu, a.delta, a.budget, rng);
  out << fmt::format("n={} r={} mu={} delta={} packing_lower_bound={} candidates={} draws={}\n", a.n, a.r,
                     report::format_real(a.mu), report::format_real(a.delta), res.count, res.candidates, res.draws);
  return 0;
}

struct PlotArgs {
  std::string input, metric = "d_inf", out, title;
  double level = 0.95;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
};

int do_plot(const PlotArgs& a, std::ostream& out) {
  std::ifstream is(a.input);
  if (!is) throw InputError("cannot open '" + a.input + "'");
  std::vector<exp::TrialRecord> records;
  try {
    records = report::parse_csv(is);
  } catch (const InputError& e) {
    throw InputError(a.input + ": " + e.what());
  }
  std::vector<exp::TrialRecord> kept;
  for (const auto& r : records)
    if (a.metric == "d_inf" ? r.k != 0 : true) kept.push_back(r);
  const auto rows = exp::summarize(kept, a.metric, a.level, a.bootstrap, a.seed);
  report::PlotSpec spec;
  spec.metric = a.metric;
  spec.title = a.title;
  emit(a.out, report::emit_plot(rows, spec), out);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coherence-free eigenvector estimation for spiked symmetric matrices"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo sweeps");
  simulate->require_subcommand(1);
  SimulateArgs s1, sr;
  auto* rank1 = simulate->add_subcommand("rank1", "Rank-one sweep");
  add_simulate_options(rank1, s1, false);
  auto* rankr = simulate->add_subcommand("rankr", "Rank-r sweep");
  add_simulate_options(rankr, sr, true);

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Refine eigenvectors of a matrix read from a text file");
  estimate->add_option("--input", ea.input, "Matrix file: n then n*n reals")->required();
  estimate->add_option("--r", ea.r, "Rank");
  estimate->add_option("--k", ea.k, "Only this column (1-based); 0 = all");
  estimate->add_option("--sigma", ea.sigma, "auto or a known sigma^2");
  estimate->add_option("--alpha-mode", ea.alpha_mode, "grid or median");
  estimate->add_option("--beta", ea.beta, "Gap parameter");
  estimate->add_option("--seed", ea.seed, "Seed of the Haar rotation");
  estimate->add_flag("--rotate", ea.rotate, "Rank one: conjugate by a Haar rotation first");
  estimate->add_option("--json", ea.json_out, "Output path ('-' or empty for stdout)");

  EntropyArgs en;
  auto* entropy_cmd = app.add_subcommand("entropy", "Metric-entropy probes");
  entropy_cmd->require_subcommand(1);
  auto* cover = entropy_cmd->add_subcommand("cover", "Enumerate the row-profile cover");
  cover->add_option("--n", en.n)->required();
  cover->add_option("--r", en.r);
  cover->add_option("--s", en.s)->required();
  cover->add_option("--cap", en.cap, "Maximum number of elements");
  cover->add_flag("--verify", en.verify, "Check exterior covering on random profiles");
  cover->add_option("--draws", en.draws, "Profiles drawn by --verify");
  cover->add_option("--seed", en.seed);
  cover->add_flag("--list", en.list, "Print every element's integer vector");
  auto* pack = entropy_cmd->add_subcommand("pack", "Greedy packing lower bound");
  pack->add_option("--n", en.n)->required();
  pack->add_option("--r", en.r);
  pack->add_option("--mu", en.mu)->required();
  pack->add_option("--delta", en.delta)->required();
  pack->add_option("--budget", en.budget);
  pack->add_option("--seed", en.seed);

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot", "SVG chart of a trial CSV");
  plot->add_option("--input", pa.input)->required();
  plot->add_option("--metric", pa.metric, "d_inf or d_2inf");
  plot->add_option("--out", pa.out, "SVG path ('-' for stdout)");
  plot->add_option("--title", pa.title);
  plot->add_option("--level", pa.level);
  plot->add_option("--bootstrap", pa.bootstrap);
  plot->add_option("--seed", pa.seed);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    if (*rank1) return do_simulate(s1, *rank1, false, out, err);
    if (*rankr) return do_simulate(sr, *rankr, true, out, err);
    if (*estimate) return do_estimate(ea, out);
    if (*cover) return do_cover(en, out);
    if (*pack) return do_pack(en, out);
    if (*plot) {
      if (pa.metric != "d_inf" && pa.metric != "d_2inf") throw InputError("--metric must be d_inf or d_2inf");
      return do_plot(pa, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NotFoundError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const SizeError& e) {
    err << "error: " << e.what() << " (upper bound " << report::format_real(e.bound()) << ")\n";
    return 2;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << " (best residual " << e.best_residual() << ")\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace spiked::cli
