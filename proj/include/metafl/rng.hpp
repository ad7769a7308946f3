#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace metafl {

/// Deterministic pseudo-random generator: xoshiro256** seeded through
/// SplitMix64. Every derived quantity (uniforms, normals, gammas, shuffles)
/// is computed here rather than through <random> distributions, whose
/// algorithms differ between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer on [0, n). Unbiased (rejection sampling). n must be > 0.
  std::size_t below(std::size_t n);

  /// Standard normal via the Box-Muller transform.
  double normal();

  /// Natural log of a Gamma(shape, 1) draw. Working in log space keeps
  /// tiny shapes (Dirichlet beta << 1) from underflowing to zero.
  double log_gamma_variate(double shape);

  /// Point drawn from a symmetric Dirichlet(concentration) on the k-simplex.
  std::vector<double> dirichlet(double concentration, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  /// Fork a statistically independent stream keyed by `tag`.
  Rng fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

/// Mix a base seed with a sequence of tags into a fresh 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace metafl
