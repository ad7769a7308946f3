#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "metafl/aggregator.hpp"
#include "metafl/dataset.hpp"
#include "metafl/metafeatures.hpp"
#include "metafl/numerics.hpp"
#include "metafl/rng.hpp"

namespace metafl::testing {

inline bool simplex_ok(std::span<const double> w) {
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

inline std::vector<double> random_values(Rng& rng, std::size_t k, double lo, double hi) {
  std::vector<double> v(k);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Ternary search for the minimum of a convex function on [lo, hi].
template <typename F>
double ternary_min(F&& f, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2)) hi = m2;
    else lo = m1;
  }
  return 0.5 * (lo + hi);
}

// Labels-only dataset helper: 1-D features equal to the label.
inline ClientDataset labels_only(std::vector<int> labels, std::size_t classes) {
  std::vector<double> features(labels.begin(), labels.end());
  return ClientDataset(1, classes, std::move(features), std::move(labels));
}

inline ClientReport make_report(std::size_t id, std::vector<double> theta, double val_loss,
                                std::size_t n_k = 10) {
  ClientReport r{id, ParamVector(std::move(theta)), {}, {}, n_k};
  r.perf.val_loss = val_loss;
  r.meta.dataset_size = n_k;
  return r;
}

}  // namespace metafl::testing
