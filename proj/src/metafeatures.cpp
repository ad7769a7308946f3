#include "metafl/metafeatures.hpp"

#include <algorithm>
#include <cmath>

#include "metafl/datagen.hpp"
#include "metafl/error.hpp"

namespace metafl {

std::array<double, kNumMetaFeatures> MetaFeatures::as_array() const {
  return {static_cast<double>(dataset_size), label_entropy, update_norm, data_complexity,
          lr_sensitivity};
}

void MetaFeatures::validate() const {
  for (double v : as_array()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw NumericalError("meta-features must be finite and non-negative");
    }
  }
}

double label_entropy(const ClientDataset& data) {
  double h = 0.0;
  for (double p : label_distribution(data, data.num_classes())) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

MetaFeatures extract(const ModelSpec& spec, const ParamVector& theta_prev,
                     const ParamVector& theta_k, const ClientDataset& train,
                     const ClientDataset& val, const TrainConfig& cfg) {
  if (theta_prev.dim() != theta_k.dim()) {
    throw InvalidArgument("extract: theta_prev and theta_k differ in dimension");
  }
  MetaFeatures x;
  x.dataset_size = train.size();
  x.label_entropy = label_entropy(train);

  double d2 = 0.0;
  for (std::size_t i = 0; i < theta_k.dim(); ++i) {
    const double diff = theta_k[i] - theta_prev[i];
    d2 += diff * diff;
  }
  x.update_norm = std::sqrt(d2);

  TrainConfig one_epoch = cfg;
  one_epoch.epochs = 1;

  // Linear probe trained from zero: how hard the client's task is on its own.
  ModelSpec probe{spec.input_dim, 0, spec.num_classes, spec.activation};
  const auto probe_theta =
      train_local(probe, ParamVector::zeros(probe.param_count()), train, one_epoch);
  x.data_complexity = local_loss(probe, probe_theta, val);

  // Loss response to a +50% learning-rate change over one extra epoch.
  TrainConfig boosted = one_epoch;
  boosted.learning_rate = cfg.learning_rate * (1.0 + kLrPerturbation);
  const double base = local_loss(spec, train_local(spec, theta_k, train, one_epoch), val);
  const double perturbed = local_loss(spec, train_local(spec, theta_k, train, boosted), val);
  x.lr_sensitivity = std::abs(perturbed - base) / kLrPerturbation;

  x.validate();
  return x;
}

namespace {

struct FeatureBounds {
  std::array<double, kNumMetaFeatures> lo;
  std::array<double, kNumMetaFeatures> hi;
};

FeatureBounds cohort_bounds(std::span<const MetaFeatures> cohort) {
  FeatureBounds b;
  b.lo.fill(INFINITY);
  b.hi.fill(-INFINITY);
  for (const auto& m : cohort) {
    const auto v = m.as_array();
    for (std::size_t j = 0; j < kNumMetaFeatures; ++j) {
      if (!std::isfinite(v[j])) throw NumericalError("composite_error: non-finite meta-feature");
      b.lo[j] = std::min(b.lo[j], v[j]);
      b.hi[j] = std::max(b.hi[j], v[j]);
    }
  }
  return b;
}

void check_coefficients(const CompositeErrorConfig& cfg) {
  for (double c : cfg.c) {
    if (!std::isfinite(c)) throw NumericalError("composite_error: non-finite coefficient");
  }
}

double error_with_bounds(double loss_k, const MetaFeatures& x, const FeatureBounds& b,
                         const CompositeErrorConfig& cfg) {
  if (!std::isfinite(loss_k)) throw NumericalError("composite_error: non-finite loss");
  const auto raw = x.as_array();
  double e = loss_k;
  for (std::size_t j = 0; j < kNumMetaFeatures; ++j) {
    if (cfg.c[j] == 0.0) continue;
    double value = raw[j];
    if (cfg.normalize) {
      value = b.hi[j] > b.lo[j] ? (value - b.lo[j]) / (b.hi[j] - b.lo[j]) : 0.0;
    }
    e += cfg.c[j] * value;
  }
  return e;
}

}  // namespace

double composite_error(double loss_k, const MetaFeatures& x,
                       std::span<const MetaFeatures> cohort, const CompositeErrorConfig& cfg) {
  check_coefficients(cfg);
  if (std::find(cohort.begin(), cohort.end(), x) == cohort.end()) {
    throw InvalidArgument("composite_error: client meta-features are not part of the cohort");
  }
  return error_with_bounds(loss_k, x, cohort_bounds(cohort), cfg);
}

std::vector<double> composite_errors(std::span<const double> losses,
                                     std::span<const MetaFeatures> cohort,
                                     const CompositeErrorConfig& cfg) {
  if (losses.size() != cohort.size()) {
    throw InvalidArgument("composite_errors: one loss per client");
  }
  check_coefficients(cfg);
  const auto bounds = cohort_bounds(cohort);
  std::vector<double> out(cohort.size());
  for (std::size_t k = 0; k < cohort.size(); ++k) {
    out[k] = error_with_bounds(losses[k], cohort[k], bounds, cfg);
  }
  return out;
}

}  // namespace metafl
