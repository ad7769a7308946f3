#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "metafl/dataset.hpp"

namespace metafl {

struct PartitionConfig {
  std::size_t num_clients = 1;
  double dirichlet_beta = 0.5;
  double val_fraction = 0.2;
  std::vector<std::size_t> noise_clients;
  double label_noise_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct ClientSplit {
  ClientDataset train;
  ClientDataset val;
};

/// Maximum number of Dirichlet draws before partitioning gives up.
inline constexpr int kMaxPartitionAttempts = 100;

/// Gaussian clusters around seeded centroids that are pairwise at least one
/// unit apart. Labels cycle through the classes, so counts differ by at most 1.
ClientDataset make_blobs(std::size_t num_classes, std::size_t dim, std::size_t n,
                         double spread, std::uint64_t seed);

/// Seeded IID split: returns {kept, held_out} with round(fraction * n) rows
/// held out (at least one, and at least one kept).
std::pair<ClientDataset, ClientDataset> holdout_split(const ClientDataset& data,
                                                      double fraction, std::uint64_t seed);

/// Per-class Dirichlet(beta) label skew across cfg.num_clients clients, then a
/// per-client train/val split. Every client receives at least two samples so
/// both of its splits are non-empty. Label noise is not applied here.
std::vector<ClientSplit> partition_dirichlet(const ClientDataset& data,
                                             const PartitionConfig& cfg);

/// Reassigns exactly round(rate * n) labels, each to a different class.
ClientDataset inject_label_noise(const ClientDataset& data, double rate, std::uint64_t seed);

/// Applies inject_label_noise to the train and val sets of cfg.noise_clients.
void apply_partition_noise(std::vector<ClientSplit>& clients, const PartitionConfig& cfg);

/// Reads d feature columns followed by one integer label column.
ClientDataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                       bool has_header = false);

/// Writes `data` in the format load_csv reads, at full round-trip precision.
void write_csv(const std::filesystem::path& path, const ClientDataset& data,
               bool with_header = false);

/// Empirical class proportions.
std::vector<double> label_distribution(const ClientDataset& data, std::size_t num_classes);

}  // namespace metafl
