#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "metafl/dataset.hpp"
#include "metafl/metafeatures.hpp"
#include "metafl/models.hpp"
#include "metafl/numerics.hpp"
#include "metafl/rng.hpp"

namespace metafl {

/// Knobs of the meta-aggregator.
struct MetaParams {
  double alpha = 1.0;   // softmax temperature on composite errors
  double lambda = 0.0;  // L2 shrinkage on the aggregate
  // Entropic regularizer strength. Unset means 1/alpha (or +inf when
  // alpha == 0, which makes every solver return uniform weights).
  std::optional<double> tau;
  double eta = 0.1;  // iterative solver step
  std::size_t max_iters = 5000;
  double tol = 1e-10;
  CompositeErrorConfig c;

  double effective_tau() const;
  void validate() const;

  friend bool operator==(const MetaParams&, const MetaParams&) = default;
};

struct ClientReport {
  std::size_t client_id = 0;
  ParamVector theta_k;
  PerformanceMetrics perf;
  MetaFeatures meta;
  std::size_t n_k = 1;
};

struct AggregationOutcome {
  ParamVector theta_g;
  WeightVector weights;
  std::vector<double> errors_E;
  double phi_value = 0.0;
  std::size_t solver_iters = 0;
  double global_loss = 0.0;
};

enum class Solver { mirror, projected };
enum class AggregationMode { closed_form, iterative_mirror, iterative_projected };

std::string_view to_string(Solver s);
std::string_view to_string(AggregationMode m);

struct IterativeResult {
  WeightVector weights;
  std::size_t iters = 0;
  double residual = 0.0;
  std::vector<double> residuals;  // ||w(t+1) - w(t)||_inf per iteration
};

/// Projected-gradient iterates are clamped to this floor before the log.
inline constexpr double kGradientFloor = 1e-12;

WeightVector weights_closed_form(std::span<const double> errors, double alpha);

/// sum_k w_k E_k + tau * sum_k w_k ln w_k, with 0 ln 0 = 0.
double phi_objective(const WeightVector& w, std::span<const double> errors, double tau);

/// dPhi/dw_k = E_k + tau (1 + ln w_k). Requires every w_k > 0.
std::vector<double> phi_gradient(std::span<const double> w, std::span<const double> errors,
                                 double tau);

/// One step of the chosen solver from `w`. Exposed for contraction checks.
std::vector<double> solver_step(std::span<const double> w, std::span<const double> errors,
                                double tau, double eta, Solver solver);

/// Iterates solver_step from the uniform point until the sup-norm change
/// drops below mp.tol or mp.max_iters steps have been taken.
IterativeResult weights_iterative(std::span<const double> errors, const MetaParams& mp,
                                  Solver solver);

/// (sum_k w_k theta_k) / (1 + lambda): the minimizer of
/// sum_k w_k ||theta - theta_k||^2 + lambda ||theta||^2.
ParamVector aggregate(std::span<const ClientReport> reports, const WeightVector& w,
                      double lambda);

/// sum_k w_k val_loss_k + lambda ||theta_g||^2.
double global_loss(std::span<const ClientReport> reports, const WeightVector& w,
                   const ParamVector& theta_g, double lambda);

/// n_k / sum(n).
WeightVector fedavg_weights(std::span<const std::size_t> n);

/// Composite error of every client in the cohort.
std::vector<double> cohort_errors(std::span<const ClientReport> reports,
                                  const CompositeErrorConfig& cfg);

/// Full meta-aggregation: composite errors, weights, aggregate, objective values.
AggregationOutcome meta_agg(std::span<const ClientReport> reports, const MetaParams& mp,
                            AggregationMode mode);

/// Same as meta_agg but with caller-supplied composite errors.
AggregationOutcome meta_agg(std::span<const ClientReport> reports,
                            std::span<const double> errors, const MetaParams& mp,
                            AggregationMode mode);

/// Grid search over alpha: aggregates with every candidate and keeps the one
/// whose aggregate has the lowest loss on `global_val` (ties: smallest alpha).
MetaParams adapt_meta_params(const MetaParams& mp, std::span<const double> candidates_alpha,
                             std::span<const ClientReport> reports, const ModelSpec& spec,
                             const ClientDataset& global_val,
                             AggregationMode mode = AggregationMode::closed_form);

/// Largest observed d(step(w), step(w')) / d(w, w') over `samples` random
/// interior pairs. The mirror step is measured in the Hilbert projective
/// metric max_i ln(w_i/w'_i) - min_i ln(w_i/w'_i), where it contracts by
/// |1 - eta tau|; the projected step is measured in the Euclidean norm.
double contraction_estimate(std::span<const double> errors, const MetaParams& mp,
                            std::size_t samples, Rng& rng, Solver solver = Solver::mirror);

/// sum_k w_k L(theta_k) - L(sum_k w_k theta_k) for an arbitrary loss.
double jensen_gap(const ScalarFunction& loss, std::span<const ParamVector> thetas,
                  const WeightVector& w);

/// Jensen gap of the model's mean cross-entropy on `data`.
double jensen_gap(const ModelSpec& spec, std::span<const ParamVector> thetas,
                  const WeightVector& w, const ClientDataset& data);

/// sqrt(2 log_H / m) + sqrt(2 kl_avg / m) + 1 / sqrt(m).
double generalization_bound(double log_h, std::size_t m, double kl_avg);

}  // namespace metafl
