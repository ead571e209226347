// Acceptance report: one PASS/FAIL line per criterion with the measured values.
// Exit status is 0 when every criterion was evaluated; pass --strict to make
// any FAIL line produce exit status 1.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../tools/cli.hpp"
#include "oracle.hpp"
#include "spiked/entropy.hpp"
#include "spiked/estimators.hpp"
#include "spiked/experiment.hpp"
#include "spiked/linalg.hpp"
#include "spiked/metrics.hpp"
#include "spiked/model.hpp"
#include "spiked/rng.hpp"

using namespace spiked;
using linalg::Matrix;
using linalg::SymMatrix;
using linalg::Vector;

namespace {

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool pass, const std::string& detail) { results[id] = {pass, detail}; }

struct Key {
  std::size_t n;
  double a;
  exp::Method method;
  std::size_t k;
  auto operator<=>(const Key&) const = default;
};

// Mean of a record field per (n, a, method, k).
std::map<Key, double> means(const std::vector<exp::TrialRecord>& recs,
                            const std::function<std::optional<double>(const exp::TrialRecord&)>& field) {
  std::map<Key, std::pair<double, std::size_t>> acc;
  for (const auto& r : recs) {
    const auto v = field(r);
    if (!v) continue;
    auto& slot = acc[Key{r.n, r.a, r.method, r.k}];
    slot.first += *v;
    ++slot.second;
  }
  std::map<Key, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
  return out;
}

std::size_t count_status(const std::vector<exp::TrialRecord>& recs, exp::TrialStatus s) {
  return static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [&](auto& r) { return r.fallback == s; }));
}

constexpr auto spectral = exp::Method::spectral;
constexpr auto refined = exp::Method::refined;

void rank_one_criteria() {
  exp::ExperimentConfig cfg;
  cfg.n_grid = {512, 1024, 2048};
  cfg.a_values = {0.3, 0.55, 0.8};
  cfg.trials = 20;
  const auto recs = exp::run(cfg);
  const auto d = means(recs, [](auto& r) { return r.d_inf; });
  fmt::print("     rank-one sweep: {} records, {} spectral fallbacks, {} failed\n", recs.size(),
             count_status(recs, exp::TrialStatus::spectral_fallback), count_status(recs, exp::TrialStatus::failed));
  for (std::size_t n : cfg.n_grid)
    for (double a : cfg.a_values)
      fmt::print("     n={} a={}: mean d_inf refined={:.6f} spectral={:.6f}\n", n, a, d.at({n, a, refined, 1}),
                 d.at({n, a, spectral, 1}));

  const double r1 = d.at({2048, 0.8, refined, 1}) / d.at({2048, 0.3, refined, 1});
  report(1, r1 >= 0.5 && r1 <= 2.0, fmt::format("refined d_inf ratio a=0.8/a=0.3 at n=2048: {:.4f} (need [0.5, 2.0])", r1));

  const double r2 = d.at({2048, 0.8, spectral, 1}) / d.at({2048, 0.3, spectral, 1});
  report(2, r2 >= 1.5, fmt::format("spectral d_inf ratio a=0.8/a=0.3 at n=2048: {:.4f} (need >= 1.5)", r2));

  const double hi = d.at({2048, 0.8, refined, 1}) / d.at({2048, 0.8, spectral, 1});
  const double mid = d.at({2048, 0.55, refined, 1}) / d.at({2048, 0.55, spectral, 1});
  const double lo = d.at({2048, 0.3, refined, 1}) / d.at({2048, 0.3, spectral, 1});
  report(3, hi <= 0.5 && lo <= 1.0,
         fmt::format("refined/spectral d_inf at n=2048: a=0.8 {:.4f} (need <= 0.5), a=0.55 {:.4f}, a=0.3 {:.4f} "
                     "(need <= 1.0)",
                     hi, mid, lo));

  auto normalized = [&](std::size_t n) {
    const double ln = std::log(static_cast<double>(n));
    return d.at({n, 0.8, refined, 1}) * model::default_spike_strength(n) / std::pow(ln, 2.5);
  };
  const double c512 = normalized(512), c1024 = normalized(1024), c2048 = normalized(2048);
  report(5, c2048 <= 1.5 * c512,
         fmt::format("normalized refined error d_inf*lambda/(log n)^2.5 at a=0.8: n=512 {:.5f}, n=1024 {:.5f}, "
                     "n=2048 {:.5f}; ratio 2048/512 {:.4f} (need <= 1.5)",
                     c512, c1024, c2048, c2048 / c512));

  const auto err = means(recs, [](auto& r) -> std::optional<double> {
    if (!r.lambda_hat || !r.lambda_true) return std::nullopt;
    return std::abs(*r.lambda_hat - *r.lambda_true);
  });
  const double deb = err.at({2048, 0.3, refined, 1}), raw = err.at({2048, 0.3, spectral, 1});
  report(6, deb <= 0.5 * raw,
         fmt::format("mean |lambda - lambda*| at n=2048 a=0.3: debiased {:.4f}, raw {:.4f}, ratio {:.4f} (need <= 0.5)",
                     deb, raw, deb / raw));

  const auto s2 = means(recs, [](auto& r) -> std::optional<double> {
    return r.method == refined ? r.sigma2_hat : std::nullopt;
  });
  const double m7 = s2.at({1024, 0.8, refined, 1});
  report(7, std::abs(m7 - 1.0) <= 0.1,
         fmt::format("mean plug-in sigma2 at n=1024 a=0.8: {:.6f} (a=0.3 {:.6f}, a=0.55 {:.6f}); |mean - 1| = {:.6f} "
                     "(need <= 0.1)",
                     m7, s2.at({1024, 0.3, refined, 1}), s2.at({1024, 0.55, refined, 1}), std::abs(m7 - 1.0)));
}

void bbp_floor() {
  const std::size_t n = 1024;
  const double lambda = 1.5 * std::sqrt(static_cast<double>(n));
  const double floor = 0.6 * std::sqrt(static_cast<double>(n) * static_cast<double>(n)) / (2.0 * std::sqrt(2.0) * lambda * lambda);
  const auto truth = model::make_truth(Vector::Unit(n, 0), {lambda});
  double total = 0.0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    RngStream rng(derive_seed({1, 4, n, static_cast<std::uint64_t>(t)}));
    const auto y = model::assemble_observation(truth, model::gen_noise(n, model::NoiseSpec::make(model::NoiseDist::gaussian), rng));
    total += metrics::d_inf(linalg::top_eigenpairs(y, 1)[0].vector, truth.u_star.col(0));
  }
  const double mean = total / trials;
  report(4, mean >= floor,
         fmt::format("spectral mean d_inf with u*=e1, lambda=1.5 sqrt(n), n=1024: {:.5f} (need >= {:.5f})", mean, floor));
}

void rank_two() {
  auto cfg = exp::rankr_defaults(2);
  cfg.n_grid = {2048};
  cfg.a_values = {0.8};
  cfg.trials = 20;
  const auto recs = exp::run(cfg);
  const auto d = means(recs, [](auto& r) { return r.d_inf; });
  const auto d2 = means(recs, [](auto& r) { return r.k == 0 ? r.d_2inf : std::nullopt; });
  const double k1 = d.at({2048, 0.8, refined, 1}) / d.at({2048, 0.8, spectral, 1});
  const double k2 = d.at({2048, 0.8, refined, 2}) / d.at({2048, 0.8, spectral, 2});
  fmt::print("     rank-two sweep: {} spectral fallbacks, {} failed; whole-basis d_2inf refined={:.6f} spectral={:.6f}\n",
             count_status(recs, exp::TrialStatus::spectral_fallback), count_status(recs, exp::TrialStatus::failed),
             d2.at({2048, 0.8, refined, 0}), d2.at({2048, 0.8, spectral, 0}));
  report(8, k1 <= 0.6 && k2 <= 0.6,
         fmt::format("rank-2 refined/spectral d_inf at n=2048 a=0.8: k=1 {:.4f} ({:.6f}/{:.6f}), k=2 {:.4f} "
                     "({:.6f}/{:.6f}) (need <= 0.6 each)",
                     k1, d.at({2048, 0.8, refined, 1}), d.at({2048, 0.8, spectral, 1}), k2,
                     d.at({2048, 0.8, refined, 2}), d.at({2048, 0.8, spectral, 2})));
}

void noiseless() {
  RngStream rng(derive_seed({1, 9}));
  double worst1 = 0.0, worst2 = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 64 + rng.index(193);
    const double a = 0.3 + 0.5 * rng.uniform();
    const auto scheme = rep % 2 ? model::Scheme::haar : model::Scheme::bernoulli;
    const double lambda = model::default_spike_strength(n);
    const auto gt = model::gen_rank_r_basis(model::SignalSpec{n, 1, a, scheme, {lambda}}, rng);
    const auto y = gt.signal();
    est::RefineOptions o;
    o.sigma2 = 0.0;
    const auto e1 = est::refine_rank1(y, lambda, o);
    worst1 = std::max(worst1, metrics::d_inf(e1.u_hat, gt.u_star.col(0)));
    const auto e2 = est::refine_rank_r(y, 1, 1, lambda, 0.0, rng);
    worst2 = std::max(worst2, metrics::d_inf(e2.u_hat, gt.u_star.col(0)));
  }
  report(9, worst1 <= 1e-10 && worst2 <= 1e-8,
         fmt::format("noiseless worst d_inf over 100 instances: rank-one {:.3e} (need <= 1e-10), rotated r=1 {:.3e} "
                     "(need <= 1e-8)",
                     worst1, worst2));
}

void oracle_suites() {
  RngStream rng(derive_seed({1, 10}));
  double eig_worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.index(16);
    const auto a = oracle::random_symmetric(n, rng);
    const auto s = linalg::top_eigenpairs(a, n);
    const auto ref = oracle::by_magnitude(oracle::jacobi_eigen(a.dense()).values);
    for (std::size_t k = 0; k < n; ++k) eig_worst = std::max(eig_worst, std::abs(ref[k] - s[k].value));
  }

  std::size_t sign_bad = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 4 + rng.index(60), r = 1 + rng.index(3);
    const Matrix us = linalg::haar_stiefel(n, r, rng);
    const Matrix uh = linalg::haar_stiefel(n, r, rng);
    double brute = INFINITY;
    for (unsigned mask = 0; mask < (1u << r); ++mask) {
      Matrix dm = uh;
      for (std::size_t k = 0; k < r; ++k)
        if (mask >> k & 1u) dm.col(static_cast<Eigen::Index>(k)) *= -1.0;
      double worst = 0.0;
      for (Eigen::Index i = 0; i < us.rows(); ++i) worst = std::max(worst, (us.row(i) - dm.row(i)).norm());
      brute = std::min(brute, worst);
    }
    const double sm = metrics::d_2inf_signed(uh, us, false);
    const double ex = metrics::d_2inf_signed(uh, us, true);
    if (sm < brute - 1e-12 || std::abs(ex - brute) > 1e-12) ++sign_bad;
  }

  double deb_worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.index(10000);
    const double s2 = 0.01 + 10.0 * rng.uniform();
    const double star = 2.0 * std::sqrt(static_cast<double>(n) * s2) * (1.0 + 1e-3 + 9.0 * rng.uniform());
    const double raw = star + static_cast<double>(n) * s2 / star;
    deb_worst = std::max(deb_worst, std::abs(est::debias_lambda(raw, n, s2).value - star) / std::max(1.0, star));
  }
  report(10, eig_worst <= 1e-9 && sign_bad == 0 && deb_worst <= 1e-9,
         fmt::format("Jacobi max eigenvalue gap {:.3e} over 200 (need <= 1e-9); d_2inf oracle violations {} of 500; "
                     "debias inversion max relative error {:.3e} over 1000 (need <= 1e-9)",
                     eig_worst, sign_bad, deb_worst));
}

void entropy_suite() {
  RngStream rng(derive_seed({1, 11}));
  std::size_t bad = 0;
  double worst_ratio = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng.index(20), r = 1 + rng.index(n), s = 1 + rng.index(100);
    const auto h = entropy::sample_profile(n, r, rng);
    const auto q = entropy::quantize_profile(h, s);
    const double e = (q.profile.h - h.h).cwiseAbs().maxCoeff();
    worst_ratio = std::max(worst_ratio, e * std::sqrt(static_cast<double>(s)));
    if (e > 1.0 / std::sqrt(static_cast<double>(s)) + 1e-12) ++bad;
  }
  const auto small = entropy::enumerate_cover_T(2, 1, 4);
  const auto cover = entropy::enumerate_cover_T(6, 2, 9);
  const auto chk = entropy::verify_exterior_cover(cover, 1000, rng);
  report(11, bad == 0 && small.size() == 5 && chk.misses == 0,
         fmt::format("quantizer bound violations {} of 1000 (worst error*sqrt(s) {:.4f}); |cover(2,1,4)| = {} (need 5); "
                     "exterior-cover misses {} of {} at (6,2,9), worst l_inf {:.4f}",
                     bad, worst_ratio, small.size(), chk.misses, chk.draws, chk.worst_error));
}

void determinism() {
  auto simulate = [](std::vector<std::string> args, const std::string& threads) {
    args.insert(args.begin(), "spiked");
    args.insert(args.end(), {"--threads", threads, "--out", "-"});
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return std::make_pair(code, out.str());
  };
  const std::vector<std::vector<std::string>> invocations{
      {"simulate", "rank1", "--n", "128,256", "--a", "0.3,0.8", "--noise", "gaussian,laplacian,rademacher", "--scheme",
       "haar,bernoulli", "--trials", "4", "--seed", "12"},
      {"simulate", "rankr", "--r", "2", "--n", "256", "--a", "0.55", "--trials", "4", "--seed", "12"},
      {"simulate", "rank1", "--n", "256", "--alpha-mode", "grid", "--sigma", "known", "--eig", "support_sum",
       "--trials", "3"},
  };
  bool ok = true;
  std::size_t bytes = 0;
  for (const auto& inv : invocations) {
    const auto a = simulate(inv, "1");
    const auto b = simulate(inv, "4");
    const auto c = simulate(inv, "4");
    ok = ok && a.first == 0 && a == b && b == c;
    bytes += a.second.size();
  }
  report(12, ok, fmt::format("{} simulate invocations, serial vs 4 threads vs rerun: {} ({} CSV bytes compared)",
                             invocations.size(), ok ? "byte-identical" : "MISMATCH", bytes));
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  try {
    rank_one_criteria();
    bbp_floor();
    rank_two();
    noiseless();
    oracle_suites();
    entropy_suite();
    determinism();
  } catch (const std::exception& e) {
    fmt::print("acceptance aborted: {}\n", e.what());
    return 2;
  }
  int failures = 0;
  for (const auto& [id, res] : results) {
    fmt::print("{} {:>2} {}\n", res.first ? "PASS" : "FAIL", id, res.second);
    failures += !res.first;
  }
  fmt::print("{} of {} criteria failed\n", failures, results.size());
  return strict && failures ? 1 : 0;
}
