#include "metafl/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "metafl/error.hpp"

namespace metafl {
namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericalError(what);
  }
}

double hilbert_distance(std::span<const double> a, std::span<const double> b) {
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = std::log(a[i]) - std::log(b[i]);
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  return hi - lo;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<ParamVector> thetas_of(std::span<const ClientReport> reports) {
  std::vector<ParamVector> thetas;
  thetas.reserve(reports.size());
  for (const auto& r : reports) thetas.push_back(r.theta_k);
  return thetas;
}

}  // namespace

std::string_view to_string(Solver s) { return s == Solver::mirror ? "mirror" : "projected"; }

std::string_view to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::closed_form: return "closed_form";
    case AggregationMode::iterative_mirror: return "iterative_mirror";
    case AggregationMode::iterative_projected: return "iterative_projected";
  }
  return "unknown";
}

double MetaParams::effective_tau() const {
  if (tau) return *tau;
  return alpha > 0.0 ? 1.0 / alpha : std::numeric_limits<double>::infinity();
}

void MetaParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
  if (tau && (!(*tau > 0.0) || !std::isfinite(*tau))) {
    throw InvalidArgument("tau must be positive");
  }
  // eta == 0 is accepted: it turns the solver step into the identity map.
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be >= 0");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (!(tol > 0.0 && tol < 1.0)) throw InvalidArgument("tol must be in (0, 1)");
}

WeightVector weights_closed_form(std::span<const double> errors, double alpha) {
  return softmax_neg(errors, alpha);
}

double phi_objective(const WeightVector& w, std::span<const double> errors, double tau) {
  if (w.size() != errors.size()) throw InvalidArgument("phi_objective: size mismatch");
  require_finite(errors, "phi_objective: non-finite error metric");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw NumericalError("phi_objective: bad tau");
  double linear = 0.0;
  double entropy = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    linear += w[k] * errors[k];
    if (w[k] > 0.0) entropy += w[k] * std::log(w[k]);
  }
  return linear + tau * entropy;
}

std::vector<double> phi_gradient(std::span<const double> w, std::span<const double> errors,
                                 double tau) {
  if (w.size() != errors.size()) throw InvalidArgument("phi_gradient: size mismatch");
  require_finite(errors, "phi_gradient: non-finite error metric");
  std::vector<double> g(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!(w[k] > 0.0)) throw InvalidArgument("boundary gradient undefined");
    g[k] = errors[k] + tau * (1.0 + std::log(w[k]));
  }
  return g;
}

std::vector<double> solver_step(std::span<const double> w, std::span<const double> errors,
                                double tau, double eta, Solver solver) {
  if (w.size() != errors.size()) throw InvalidArgument("solver_step: size mismatch");
  const std::size_t k = w.size();
  if (solver == Solver::mirror) {
    // ln w+ = ln w - eta * grad, renormalized with a max shift.
    std::vector<double> logs(k, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < k; ++i) {
      if (w[i] > 0.0) {
        const double lw = std::log(w[i]);
        logs[i] = lw - eta * (errors[i] + tau * (1.0 + lw));
      }
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double total = 0.0;
    for (double& l : logs) {
      l = std::exp(l - top);
      total += l;
    }
    for (double& l : logs) l /= total;
    return logs;
  }
  std::vector<double> clamped(w.begin(), w.end());
  for (double& x : clamped) x = std::max(x, kGradientFloor);
  const auto g = phi_gradient(clamped, errors, tau);
  std::vector<double> moved(k);
  for (std::size_t i = 0; i < k; ++i) moved[i] = w[i] - eta * g[i];
  for (double x : moved) {
    if (!std::isfinite(x)) return moved;  // caller reports divergence
  }
  return project_simplex(moved).values();
}

IterativeResult weights_iterative(std::span<const double> errors, const MetaParams& mp,
                                  Solver solver) {
  mp.validate();
  if (errors.empty()) throw InvalidArgument("empty cohort");
  require_finite(errors, "non-finite error metric");
  const std::size_t k = errors.size();
  const double tau = mp.effective_tau();
  if (k == 1 || std::isinf(tau)) {
    return {WeightVector::uniform(k), 0, 0.0, {}};
  }

  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  IterativeResult out{WeightVector::uniform(k), 0, 0.0, {}};
  for (std::size_t t = 1; t <= mp.max_iters; ++t) {
    auto next = solver_step(w, errors, tau, mp.eta, solver);
    for (double x : next) {
      if (!std::isfinite(x)) {
        throw NumericalError("weights_iterative(" + std::string(to_string(solver)) +
                             "): non-finite iterate at iteration " + std::to_string(t));
      }
    }
    const double residual = max_abs_diff(next, w);
    out.residuals.push_back(residual);
    out.iters = t;
    out.residual = residual;
    w = std::move(next);
    if (residual < mp.tol) break;
  }
  out.weights = WeightVector(std::move(w));
  return out;
}

ParamVector aggregate(std::span<const ClientReport> reports, const WeightVector& w,
                      double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("lambda must be >= 0");
  }
  const auto thetas = thetas_of(reports);
  const ParamVector sum = weighted_sum(thetas, w);
  return lambda == 0.0 ? sum : sum.scaled(1.0 / (1.0 + lambda));
}

double global_loss(std::span<const ClientReport> reports, const WeightVector& w,
                   const ParamVector& theta_g, double lambda) {
  if (reports.size() != w.size()) throw InvalidArgument("global_loss: size mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < reports.size(); ++k) total += w[k] * reports[k].perf.val_loss;
  total += lambda * theta_g.squared_norm();
  if (!std::isfinite(total)) throw NumericalError("global_loss: non-finite value");
  return total;
}

WeightVector fedavg_weights(std::span<const std::size_t> n) {
  if (n.empty()) throw InvalidArgument("empty cohort");
  double total = 0.0;
  for (std::size_t nk : n) {
    if (nk < 1) throw InvalidArgument("fedavg_weights: every n_k must be >= 1");
    total += static_cast<double>(nk);
  }
  std::vector<double> w(n.size());
  for (std::size_t k = 0; k < n.size(); ++k) w[k] = static_cast<double>(n[k]) / total;
  return WeightVector(std::move(w));
}

std::vector<double> cohort_errors(std::span<const ClientReport> reports,
                                  const CompositeErrorConfig& cfg) {
  std::vector<MetaFeatures> cohort;
  std::vector<double> losses;
  cohort.reserve(reports.size());
  losses.reserve(reports.size());
  for (const auto& r : reports) {
    cohort.push_back(r.meta);
    losses.push_back(r.perf.val_loss);
  }
  return composite_errors(losses, cohort, cfg);
}

AggregationOutcome meta_agg(std::span<const ClientReport> reports, const MetaParams& mp,
                            AggregationMode mode) {
  if (reports.empty()) throw InvalidArgument("empty cohort");
  const auto errors = cohort_errors(reports, mp.c);
  return meta_agg(reports, errors, mp, mode);
}

AggregationOutcome meta_agg(std::span<const ClientReport> reports,
                            std::span<const double> errors, const MetaParams& mp,
                            AggregationMode mode) {
  mp.validate();
  if (reports.empty()) throw InvalidArgument("empty cohort");
  if (errors.size() != reports.size()) throw InvalidArgument("meta_agg: one error per client");

  std::size_t iters = 0;
  WeightVector w = WeightVector::uniform(reports.size());
  switch (mode) {
    case AggregationMode::closed_form:
      w = weights_closed_form(errors, mp.alpha);
      break;
    case AggregationMode::iterative_mirror:
    case AggregationMode::iterative_projected: {
      const auto solver =
          mode == AggregationMode::iterative_mirror ? Solver::mirror : Solver::projected;
      auto res = weights_iterative(errors, mp, solver);
      w = std::move(res.weights);
      iters = res.iters;
      break;
    }
  }

  const double tau = mp.effective_tau();
  const double phi = phi_objective(w, errors, std::isfinite(tau) ? tau : 0.0);
  ParamVector theta_g = aggregate(reports, w, mp.lambda);
  const double loss = global_loss(reports, w, theta_g, mp.lambda);
  return {std::move(theta_g), std::move(w), std::vector<double>(errors.begin(), errors.end()),
          phi, iters, loss};
}

MetaParams adapt_meta_params(const MetaParams& mp, std::span<const double> candidates_alpha,
                             std::span<const ClientReport> reports, const ModelSpec& spec,
                             const ClientDataset& global_val, AggregationMode mode) {
  if (candidates_alpha.empty()) throw InvalidArgument("empty alpha grid");
  const auto errors = cohort_errors(reports, mp.c);

  MetaParams best = mp;
  double best_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double alpha : candidates_alpha) {
    MetaParams candidate = mp;
    candidate.alpha = alpha;
    const auto outcome = meta_agg(reports, errors, candidate, mode);
    const double loss = local_loss(spec, outcome.theta_g, global_val);
    if (!have_best || loss < best_loss || (loss == best_loss && alpha < best.alpha)) {
      best = candidate;
      best_loss = loss;
      have_best = true;
    }
  }
  return best;
}

double contraction_estimate(std::span<const double> errors, const MetaParams& mp,
                            std::size_t samples, Rng& rng, Solver solver) {
  mp.validate();
  if (errors.empty()) throw InvalidArgument("empty cohort");
  if (samples < 1) throw InvalidArgument("contraction_estimate: samples must be >= 1");
  require_finite(errors, "non-finite error metric");
  const std::size_t k = errors.size();
  const double tau = mp.effective_tau();
  if (k == 1 || std::isinf(tau)) return 0.0;
  if (mp.eta == 0.0) return 1.0;  // the step is the identity map

  const auto distance = solver == Solver::mirror ? hilbert_distance : euclidean_distance;
  auto interior = [](const std::vector<double>& w) {
    return std::all_of(w.begin(), w.end(), [](double x) { return x > 0.0; });
  };
  double sup = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto a = rng.dirichlet(1.0, k);
    const auto b = rng.dirichlet(1.0, k);
    if (!interior(a) || !interior(b)) continue;
    const double d = distance(a, b);
    if (!(d > 0.0)) continue;
    const auto fa = solver_step(a, errors, tau, mp.eta, solver);
    const auto fb = solver_step(b, errors, tau, mp.eta, solver);
    if (solver == Solver::mirror && (!interior(fa) || !interior(fb))) continue;
    sup = std::max(sup, distance(fa, fb) / d);
  }
  return sup;
}

double jensen_gap(const ScalarFunction& loss, std::span<const ParamVector> thetas,
                  const WeightVector& w) {
  const ParamVector mixed = weighted_sum(thetas, w);
  if (std::all_of(thetas.begin(), thetas.end(),
                  [&](const ParamVector& t) { return t == thetas.front(); })) {
    return 0.0;
  }
  double mean = 0.0;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (w[k] != 0.0) mean += w[k] * loss(thetas[k].coords());
  }
  const double gap = mean - loss(mixed.coords());
  if (!std::isfinite(gap)) throw NumericalError("jensen_gap: non-finite loss");
  return gap;
}

double jensen_gap(const ModelSpec& spec, std::span<const ParamVector> thetas,
                  const WeightVector& w, const ClientDataset& data) {
  const auto loss = [&](std::span<const double> theta) {
    return local_loss(spec, ParamVector(std::vector<double>(theta.begin(), theta.end())), data);
  };
  return jensen_gap(loss, thetas, w);
}

double generalization_bound(double log_h, std::size_t m, double kl_avg) {
  if (m < 1) throw InvalidArgument("generalization_bound: m must be >= 1");
  if (!(log_h >= 0.0) || !(kl_avg >= 0.0)) {
    throw InvalidArgument("generalization_bound: log_H and KL must be non-negative");
  }
  const double md = static_cast<double>(m);
  return std::sqrt(2.0 * log_h / md) + std::sqrt(2.0 * kl_avg / md) + 1.0 / std::sqrt(md);
}

}  // namespace metafl
