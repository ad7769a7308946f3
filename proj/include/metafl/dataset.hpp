#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace metafl {

/// Labeled samples held by one client (or the server's validation set).
/// Features are stored row-major; labels are zero-based class indices.
class ClientDataset {
 public:
  ClientDataset(std::size_t dim, std::size_t num_classes, std::vector<double> features,
                std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Rows selected by `indices`, in that order. Indices must be non-empty.
  ClientDataset subset(std::span<const std::size_t> indices) const;

  /// Copy with labels replaced. Size and range are re-validated.
  ClientDataset with_labels(std::vector<int> labels) const;

  /// Rows of `parts` stacked in order. All parts must agree on dim/classes.
  static ClientDataset concat(std::span<const ClientDataset> parts);

  friend bool operator==(const ClientDataset&, const ClientDataset&) = default;

 private:
  std::size_t dim_;
  std::size_t num_classes_;
  std::vector<double> features_;
  std::vector<int> labels_;
};

}  // namespace metafl
