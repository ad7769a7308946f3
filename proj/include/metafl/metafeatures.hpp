#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "metafl/dataset.hpp"
#include "metafl/models.hpp"
#include "metafl/numerics.hpp"

namespace metafl {

inline constexpr std::size_t kNumMetaFeatures = 5;

/// Field order used by coefficient vectors and config files.
inline constexpr std::array<std::string_view, kNumMetaFeatures> kMetaFeatureNames = {
    "dataset_size", "label_entropy", "update_norm", "data_complexity", "lr_sensitivity"};

/// Per-client descriptor sent alongside the update.
struct MetaFeatures {
  std::size_t dataset_size = 0;
  double label_entropy = 0.0;    // nats
  double update_norm = 0.0;      // ||theta_k - theta_prev||_2
  double data_complexity = 0.0;  // val loss of a one-epoch linear probe
  double lr_sensitivity = 0.0;   // |dloss| per unit relative lr change

  std::array<double, kNumMetaFeatures> as_array() const;
  void validate() const;

  friend bool operator==(const MetaFeatures&, const MetaFeatures&) = default;
};

struct CompositeErrorConfig {
  std::array<double, kNumMetaFeatures> c{};  // one coefficient per field
  bool normalize = true;                     // min-max scale over the cohort

  friend bool operator==(const CompositeErrorConfig&, const CompositeErrorConfig&) = default;
};

/// Relative learning-rate perturbation used by the lr_sensitivity probe.
inline constexpr double kLrPerturbation = 0.5;

/// Shannon entropy of the label distribution, in nats.
double label_entropy(const ClientDataset& data);

MetaFeatures extract(const ModelSpec& spec, const ParamVector& theta_prev,
                     const ParamVector& theta_k, const ClientDataset& train,
                     const ClientDataset& val, const TrainConfig& cfg);

/// E_k = loss_k + sum_j c_j * x_j, where x is either raw or min-max scaled
/// over `cohort` (a constant feature scales to 0). `x` must be in `cohort`.
double composite_error(double loss_k, const MetaFeatures& x,
                       std::span<const MetaFeatures> cohort, const CompositeErrorConfig& cfg);

/// composite_error for every member of the cohort in one linear pass.
std::vector<double> composite_errors(std::span<const double> losses,
                                     std::span<const MetaFeatures> cohort,
                                     const CompositeErrorConfig& cfg);

}  // namespace metafl
