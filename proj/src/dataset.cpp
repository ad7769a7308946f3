#include "metafl/dataset.hpp"

#include <cmath>
#include <string>

#include "metafl/error.hpp"

namespace metafl {

ClientDataset::ClientDataset(std::size_t dim, std::size_t num_classes,
                             std::vector<double> features, std::vector<int> labels)
    : dim_(dim), num_classes_(num_classes), features_(std::move(features)),
      labels_(std::move(labels)) {
  if (dim_ == 0) throw InvalidArgument("dataset feature dimension must be >= 1");
  if (num_classes_ < 2) throw InvalidArgument("dataset needs at least 2 classes");
  if (labels_.empty()) throw InvalidArgument("empty dataset");
  if (features_.size() != labels_.size() * dim_) {
    throw InvalidArgument("dataset: feature matrix has " + std::to_string(features_.size()) +
                          " cells, expected " + std::to_string(labels_.size() * dim_));
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!std::isfinite(features_[i])) {
      throw InvalidArgument("dataset: non-finite feature in row " + std::to_string(i / dim_));
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_) {
      throw InvalidArgument("dataset: label out of range in row " + std::to_string(i));
    }
  }
}

ClientDataset ClientDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  std::vector<int> labels;
  features.reserve(indices.size() * dim_);
  labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) throw InvalidArgument("dataset subset index out of range");
    auto r = row(idx);
    features.insert(features.end(), r.begin(), r.end());
    labels.push_back(labels_[idx]);
  }
  return ClientDataset(dim_, num_classes_, std::move(features), std::move(labels));
}

ClientDataset ClientDataset::with_labels(std::vector<int> labels) const {
  return ClientDataset(dim_, num_classes_, features_, std::move(labels));
}

ClientDataset ClientDataset::concat(std::span<const ClientDataset> parts) {
  if (parts.empty()) throw InvalidArgument("concat of no datasets");
  const std::size_t dim = parts.front().dim();
  const std::size_t classes = parts.front().num_classes();
  std::vector<double> features;
  std::vector<int> labels;
  for (const auto& p : parts) {
    if (p.dim() != dim || p.num_classes() != classes) {
      throw InvalidArgument("concat: datasets disagree on dim or class count");
    }
    features.insert(features.end(), p.features().begin(), p.features().end());
    labels.insert(labels.end(), p.labels().begin(), p.labels().end());
  }
  return ClientDataset(dim, classes, std::move(features), std::move(labels));
}

}  // namespace metafl
