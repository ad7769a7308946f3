#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace metafl {

/// Tolerance on |sum(w) - 1| for every weight vector.
inline constexpr double kSimplexTolerance = 1e-9;

/// Flat vector of model parameters. Always non-empty and finite.
class ParamVector {
 public:
  explicit ParamVector(std::vector<double> coords);

  static ParamVector zeros(std::size_t dim);

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& values() const { return coords_; }

  double squared_norm() const;
  double norm() const;
  ParamVector scaled(double factor) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> coords_;
};

/// A point on the probability simplex: non-negative entries summing to one.
/// Construction validates both conditions and throws NumericalError otherwise.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> weights);

  static WeightVector uniform(std::size_t k);
  static WeightVector one_hot(std::size_t k, std::size_t index);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  const std::vector<double>& values() const { return weights_; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
};

/// True when `w` is entrywise non-negative and sums to one within `tol`.
bool on_simplex(std::span<const double> w, double tol = kSimplexTolerance);

/// w_k = exp(-alpha v_k) / sum_j exp(-alpha v_j), evaluated with max-shift.
WeightVector softmax_neg(std::span<const double> values, double alpha);

/// Euclidean projection onto {w : w >= 0, sum w = 1} (sort and threshold).
WeightVector project_simplex(std::span<const double> point);

/// sum_k w_k * vectors[k]. All vectors must share one dimension.
ParamVector weighted_sum(std::span<const ParamVector> vectors, const WeightVector& w);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient of `f` at `x` with step `h`.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double h);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace metafl
