#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spiked/linalg.hpp"
#include "spiked/rng.hpp"

namespace spiked::entropy {

using linalg::Vector;

/// A point of T(n, r): nonnegative, ||h||_2 = sqrt(r), ||h||_inf <= 1.
struct RowProfile {
  Vector h;
  std::size_t r = 1;

  /// Throws InputError unless the invariants hold (norm within 1e-10).
  static RowProfile make(Vector h, std::size_t r);
  std::size_t n() const noexcept { return static_cast<std::size_t>(h.size()); }
};

using Counts = std::vector<std::uint32_t>;

struct Quantized {
  RowProfile profile;  // v_i = sqrt(z_i / s)
  Counts z;            // integers with sum r s
  std::size_t s = 1;
};

/// Floor/ceil recursion on the squared entries scaled by s (floor for the
/// first entry, then floor iff the running deficit is negative), followed by
/// a single +-1 correction so that sum z = r s. Deficit: the lowest-index
/// entry taken at its floor with non-integral h_i^2 s is raised; surplus:
/// the lowest-index entry taken at its ceiling with non-integral h_i^2 s is
/// lowered. Guarantees ||h - v||_inf <= 1/sqrt(s).
Quantized quantize_profile(const RowProfile& h, std::size_t s);

/// All nonnegative integer z with sum r s and max z_i <= s + 1, in
/// lexicographic order.
class CoverSet {
 public:
  std::size_t n() const noexcept { return n_; }
  std::size_t r() const noexcept { return r_; }
  std::size_t s() const noexcept { return s_; }
  std::size_t size() const noexcept { return elements_.size(); }
  const Counts& counts(std::size_t i) const { return elements_[i]; }
  RowProfile profile(std::size_t i) const;
  bool contains(const Counts& z) const;

 private:
  friend CoverSet enumerate_cover_T(std::size_t, std::size_t, std::size_t, std::size_t);
  std::size_t n_ = 0, r_ = 0, s_ = 0;
  std::vector<Counts> elements_;
};

/// C(n + rs - 1, rs), as a double.
double cover_upper_bound(std::size_t n, std::size_t r, std::size_t s);

/// Exact number of solutions, saturating at `cap + 1`.
std::size_t cover_count(std::size_t n, std::size_t r, std::size_t s, std::size_t cap);

/// Throws SizeError (carrying cover_upper_bound) when the solution count exceeds `cap`.
CoverSet enumerate_cover_T(std::size_t n, std::size_t r, std::size_t s, std::size_t cap = 1'000'000);

/// Row norms of a Haar-distributed n x r orthonormal basis.
RowProfile sample_profile(std::size_t n, std::size_t r, RngStream& rng);

struct CoverCheck {
  std::size_t draws = 0;
  std::size_t misses = 0;   // quantized profile not in the cover
  double worst_error = 0.0; // max ||h - v||_inf seen
};

/// Draws profiles, quantizes each and checks membership and the distance bound.
CoverCheck verify_exterior_cover(const CoverSet& cover, std::size_t draws, RngStream& rng);

struct PackingResult {
  std::size_t count = 0;       // accepted, pairwise separated points
  std::size_t candidates = 0;  // in-set candidates examined
  std::size_t draws = 0;       // raw Haar draws including rejections
};

/// Greedy delta-separated subset of K(n, r, sqrt(mu r / n)) under the
/// exhaustive sign-resolved two-to-infinity distance. `budget` in-set
/// candidates are examined; members are obtained by rejection from Haar
/// bases. Throws DomainError when fewer than 1e-4 of the first 1e4 draws
/// land in the set.
PackingResult greedy_packing(std::size_t n, std::size_t r, double mu, double delta, std::size_t budget,
                             RngStream& rng);

}  // namespace spiked::entropy
