#include "spiked/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spiked/errors.hpp"
#include "spiked/metrics.hpp"

namespace spiked::entropy {

namespace {

// Snap values within 1e-9 of an integer, so h^2 s = 2 computed as
// 2.0000000000000004 counts as integral.
constexpr double kSnap = 1e-9;

struct Scaled {
  double x;        // h_i^2 s
  double lo, hi;   // floor and ceiling after snapping
  bool integral() const { return lo == hi; }
};

Scaled scale(double h, std::size_t s) {
  const double x = h * h * static_cast<double>(s);
  const double near = std::round(x);
  if (std::abs(x - near) <= kSnap) return {x, near, near};
  return {x, std::floor(x), std::ceil(x)};
}

}  // namespace

RowProfile RowProfile::make(Vector h, std::size_t r) {
  if (r < 1) throw InputError("RowProfile: r must be >= 1");
  if (h.size() == 0) throw InputError("RowProfile: empty profile");
  if (!h.allFinite()) throw InputError("RowProfile: non-finite entry");
  if (h.minCoeff() < 0.0) throw InputError("RowProfile: entries must be nonnegative");
  if (h.maxCoeff() > 1.0 + 1e-12) throw InputError("RowProfile: entries must be <= 1");
  if (std::abs(h.norm() - std::sqrt(static_cast<double>(r))) > 1e-10)
    throw InputError("RowProfile: norm must equal sqrt(r)");
  return RowProfile{std::move(h), r};
}

Quantized quantize_profile(const RowProfile& h, std::size_t s) {
  if (s < 1) throw InputError("quantize_profile: s must be >= 1");
  const std::size_t n = h.n();
  std::vector<Scaled> sc(n);
  for (std::size_t i = 0; i < n; ++i) sc[i] = scale(h.h(static_cast<Eigen::Index>(i)), s);

  Counts z(n);
  std::vector<bool> at_floor(n);
  double deficit = 0.0;  // s * (sum_{j<i} h_j^2 - sum_{j<i} zeta_j^2)
  for (std::size_t i = 0; i < n; ++i) {
    const bool take_floor = i == 0 || deficit < -kSnap;
    const double v = take_floor ? sc[i].lo : sc[i].hi;
    at_floor[i] = take_floor;
    z[i] = static_cast<std::uint32_t>(v);
    deficit += sc[i].x - v;
  }

  long long total = 0;
  for (auto v : z) total += v;
  const long long target = static_cast<long long>(h.r * s);
  const long long off = total - target;
  if (off == -1) {
    std::size_t i = 0;
    while (i < n && !(at_floor[i] && !sc[i].integral() && z[i] + 1 <= s + 1)) ++i;
    if (i == n) throw InternalError("quantize_profile: no entry can absorb the deficit");
    ++z[i];
  } else if (off == 1) {
    std::size_t i = 0;
    while (i < n && !(!at_floor[i] && !sc[i].integral() && z[i] >= 1)) ++i;
    if (i == n) throw InternalError("quantize_profile: no entry can absorb the surplus");
    --z[i];
  } else if (off != 0) {
    throw InternalError("quantize_profile: recursion drifted by more than one unit");
  }

  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    v(static_cast<Eigen::Index>(i)) = std::sqrt(static_cast<double>(z[i]) / static_cast<double>(s));
  return Quantized{RowProfile{std::move(v), h.r}, std::move(z), s};
}

RowProfile CoverSet::profile(std::size_t i) const {
  const Counts& z = elements_.at(i);
  Vector v(static_cast<Eigen::Index>(z.size()));
  for (std::size_t j = 0; j < z.size(); ++j)
    v(static_cast<Eigen::Index>(j)) = std::sqrt(static_cast<double>(z[j]) / static_cast<double>(s_));
  return RowProfile{std::move(v), r_};
}

bool CoverSet::contains(const Counts& z) const { return std::binary_search(elements_.begin(), elements_.end(), z); }

double cover_upper_bound(std::size_t n, std::size_t r, std::size_t s) {
  const double k = static_cast<double>(r * s);
  const double top = static_cast<double>(n) + k - 1.0;
  return std::round(std::exp(std::lgamma(top + 1.0) - std::lgamma(k + 1.0) - std::lgamma(top - k + 1.0)));
}

std::size_t cover_count(std::size_t n, std::size_t r, std::size_t s, std::size_t cap) {
  const std::size_t total = r * s, bound = s + 1;
  const std::size_t sat = cap + 1;
  // ways[t] = number of ways to reach sum t with the coordinates seen so far.
  std::vector<std::size_t> ways(total + 1, 0), next(total + 1);
  ways[0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(next.begin(), next.end(), 0);
    for (std::size_t t = 0; t <= total; ++t) {
      if (ways[t] == 0) continue;
      for (std::size_t v = 0; v <= bound && t + v <= total; ++v) next[t + v] = std::min(sat, next[t + v] + ways[t]);
    }
    ways.swap(next);
  }
  return ways[total];
}

CoverSet enumerate_cover_T(std::size_t n, std::size_t r, std::size_t s, std::size_t cap) {
  if (n < 1 || r < 1 || s < 1) throw InputError("enumerate_cover_T: n, r, s must be >= 1");
  if (r > n) throw InputError("enumerate_cover_T: r must be <= n");
  const std::size_t count = cover_count(n, r, s, cap);
  if (count > cap)
    throw SizeError("enumerate_cover_T: more than " + std::to_string(cap) + " solutions",
                    cover_upper_bound(n, r, s));

  CoverSet out;
  out.n_ = n;
  out.r_ = r;
  out.s_ = s;
  out.elements_.reserve(count);
  const std::size_t bound = s + 1;
  Counts z(n, 0);
  // Depth-first in lexicographic order; the remainder must fit in the tail.
  auto rec = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == n) {
      if (left <= bound) {
        z[i] = static_cast<std::uint32_t>(left);
        out.elements_.push_back(z);
      }
      return;
    }
    const std::size_t tail_cap = (n - i - 1) * bound;
    const std::size_t lo = left > tail_cap ? left - tail_cap : 0;
    for (std::size_t v = lo; v <= std::min(bound, left); ++v) {
      z[i] = static_cast<std::uint32_t>(v);
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, r * s);
  return out;
}

RowProfile sample_profile(std::size_t n, std::size_t r, RngStream& rng) {
  if (r < 1 || r > n) throw InputError("sample_profile: need 1 <= r <= n");
  const linalg::Matrix u = linalg::haar_stiefel(n, r, rng);
  Vector h = u.rowwise().norm();
  // Rescale away roundoff so the norm invariant holds tightly.
  h *= std::sqrt(static_cast<double>(r)) / h.norm();
  h = h.cwiseMin(1.0);
  return RowProfile::make(std::move(h), r);
}

CoverCheck verify_exterior_cover(const CoverSet& cover, std::size_t draws, RngStream& rng) {
  CoverCheck out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cover.s()));
  for (std::size_t d = 0; d < draws; ++d) {
    const RowProfile h = sample_profile(cover.n(), cover.r(), rng);
    const Quantized q = quantize_profile(h, cover.s());
    const double err = (h.h - q.profile.h).cwiseAbs().maxCoeff();
    out.worst_error = std::max(out.worst_error, err);
    if (!cover.contains(q.z) || err > bound + 1e-12) ++out.misses;
    ++out.draws;
  }
  return out;
}

PackingResult greedy_packing(std::size_t n, std::size_t r, double mu, double delta, std::size_t budget,
                             RngStream& rng) {
  if (r < 1 || r > n) throw InputError("greedy_packing: need 1 <= r <= n");
  if (r > 10) throw InputError("greedy_packing: exhaustive sign resolution limited to r <= 10");
  const double nn = static_cast<double>(n), rr = static_cast<double>(r);
  if (!(mu >= 1.0 && mu <= nn / rr)) throw InputError("greedy_packing: mu must lie in [1, n/r]");
  if (!(delta > 0.0)) throw InputError("greedy_packing: delta must be positive");

  const double radius = std::sqrt(mu * rr / nn);
  constexpr std::size_t kProbe = 10'000;
  PackingResult out;
  std::size_t hits = 0;
  std::vector<linalg::Matrix> packed;

  while (out.candidates < budget) {
    linalg::Matrix u = linalg::haar_stiefel(n, r, rng);
    ++out.draws;
    const bool member = metrics::two_inf_norm(u) <= radius;
    if (member) ++hits;
    if (out.draws == kProbe && static_cast<double>(hits) / static_cast<double>(kProbe) < 1e-4)
      throw DomainError("greedy_packing: acceptance rate below 1e-4, mu infeasible at this n");
    if (!member) continue;
    ++out.candidates;
    bool separated = true;
    for (const auto& p : packed) {
      if (metrics::d_2inf_signed(u, p, true) <= delta) {
        separated = false;
        break;
      }
    }
    if (separated) packed.push_back(std::move(u));
  }
  out.count = packed.size();
  return out;
}

}  // namespace spiked::entropy
