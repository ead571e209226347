#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace spiked {

/// SplitMix64 finalizer. Used to turn structured counters into seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of words into one seed; order-sensitive.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto w : words) h = mix64(h ^ mix64(w));
  return h;
}

/// Single-owner random stream. Not copyable so that two consumers can never
/// silently share (and desynchronise) one sequence.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  RngStream(const RngStream&) = delete;
  RngStream& operator=(const RngStream&) = delete;
  RngStream(RngStream&&) noexcept = default;
  RngStream& operator=(RngStream&&) noexcept = default;

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return normal_(engine_); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform on {0, ..., n-1}.
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  /// Laplace(0, b): density exp(-|x|/b) / (2b).
  double laplace(double b) {
    double e = std::exponential_distribution<double>(1.0)(engine_);
    return rademacher() * b * e;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace spiked
