#include "metafl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "metafl/error.hpp"

namespace metafl {
namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericalError(what);
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw InvalidArgument("ParamVector must have dim >= 1");
  require_finite(coords_, "ParamVector has a non-finite coordinate");
}

ParamVector ParamVector::zeros(std::size_t dim) {
  return ParamVector(std::vector<double>(dim, 0.0));
}

double ParamVector::squared_norm() const {
  double s = 0.0;
  for (double x : coords_) s += x * x;
  return s;
}

double ParamVector::norm() const { return std::sqrt(squared_norm()); }

ParamVector ParamVector::scaled(double factor) const {
  std::vector<double> out(coords_);
  for (double& x : out) x *= factor;
  return ParamVector(std::move(out));
}

bool on_simplex(std::span<const double> w, double tol) {
  if (w.empty()) return false;
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    total += x;
  }
  return std::abs(total - 1.0) <= tol;
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw InvalidArgument("empty cohort");
  if (!on_simplex(weights_)) {
    throw NumericalError("weights violate the simplex constraints");
  }
}

WeightVector WeightVector::uniform(std::size_t k) {
  if (k == 0) throw InvalidArgument("empty cohort");
  return WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

WeightVector WeightVector::one_hot(std::size_t k, std::size_t index) {
  if (index >= k) throw InvalidArgument("one_hot index out of range");
  std::vector<double> w(k, 0.0);
  w[index] = 1.0;
  return WeightVector(std::move(w));
}

WeightVector softmax_neg(std::span<const double> values, double alpha) {
  if (values.empty()) throw InvalidArgument("empty cohort");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("alpha must be finite and non-negative");
  }
  require_finite(values, "non-finite error metric");

  std::vector<double> logits(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) logits[k] = -alpha * values[k];
  require_finite(logits, "non-finite error metric");

  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logits) l /= total;
  return WeightVector(std::move(logits));
}

WeightVector project_simplex(std::span<const double> point) {
  if (point.empty()) throw InvalidArgument("empty cohort");
  require_finite(point, "project_simplex: non-finite coordinate");

  std::vector<double> sorted(point.begin(), point.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // Largest rho with sorted[rho] - (prefix(rho) - 1) / (rho + 1) > 0.
  double prefix = 0.0;
  double threshold = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    prefix += sorted[i];
    const double t = (prefix - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) threshold = t;
  }

  std::vector<double> w(point.size());
  double total = 0.0;
  for (std::size_t k = 0; k < point.size(); ++k) {
    w[k] = std::max(point[k] - threshold, 0.0);
    total += w[k];
  }
  // Rounding in the prefix sums can leave |sum - 1| at a few ulps.
  if (std::abs(total - 1.0) > 1e-12 && total > 0.0) {
    for (double& x : w) x /= total;
  }
  return WeightVector(std::move(w));
}

ParamVector weighted_sum(std::span<const ParamVector> vectors, const WeightVector& w) {
  if (vectors.empty()) throw InvalidArgument("empty cohort");
  if (vectors.size() != w.size()) {
    throw InvalidArgument("weighted_sum: " + std::to_string(vectors.size()) + " vectors but " +
                          std::to_string(w.size()) + " weights");
  }
  const std::size_t dim = vectors.front().dim();
  for (std::size_t k = 1; k < vectors.size(); ++k) {
    if (vectors[k].dim() != dim) {
      throw InvalidArgument("weighted_sum: dimension mismatch at index " + std::to_string(k) +
                            " (" + std::to_string(vectors[k].dim()) + " vs " +
                            std::to_string(dim) + ")");
    }
  }
  std::vector<double> out(dim, 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double wk = w[k];
    if (wk == 0.0) continue;
    const auto coords = vectors[k].coords();
    for (std::size_t i = 0; i < dim; ++i) out[i] += wk * coords[i];
  }
  return ParamVector(std::move(out));
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = point[i];
    point[i] = xi + h;
    const double up = f(point);
    point[i] = xi - h;
    const double down = f(point);
    point[i] = xi;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_grad: non-finite evaluation at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace metafl
