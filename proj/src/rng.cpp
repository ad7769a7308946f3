#include "metafl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "metafl/error.hpp"

namespace metafl {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::below: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Reject the low remainder so every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::log_gamma_variate(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw InvalidArgument("gamma shape must be positive and finite");
  }
  if (shape < 1.0) {
    // G(a) = G(a + 1) * U^(1/a)
    const double u = 1.0 - uniform();
    return log_gamma_variate(shape + 1.0) + std::log(u) / shape;
  }
  // Marsaglia and Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return std::log(d * v);
  }
}

std::vector<double> Rng::dirichlet(double concentration, std::size_t k) {
  std::vector<double> logs(k);
  for (auto& l : logs) l = log_gamma_variate(concentration);
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (auto& l : logs) {
    l = std::exp(l - top);
    total += l;
  }
  for (auto& l : logs) l /= total;
  return logs;
}

Rng Rng::fork(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t state = base;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t tag : {a, b, c}) {
    state = h ^ (tag * 0xD1B54A32D192ED03ULL);
    h = splitmix64(state);
  }
  return h;
}

}  // namespace metafl
