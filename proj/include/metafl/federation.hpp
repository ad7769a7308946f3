#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metafl/aggregator.hpp"
#include "metafl/datagen.hpp"
#include "metafl/models.hpp"
#include "metafl/numerics.hpp"

namespace metafl {

enum class AggregatorMode { metafl_closed, metafl_mirror, metafl_projected, fedavg };

std::string_view to_string(AggregatorMode m);
AggregatorMode aggregator_mode_from_string(std::string_view name);

enum class DataSource { blobs, csv };

struct DataConfig {
  DataSource source = DataSource::blobs;
  std::size_t samples = 4000;  // blobs only
  double spread = 1.0;         // blobs only
  std::string csv_path;
  bool csv_header = false;
  double global_val_fraction = 0.2;  // server-held IID holdout

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  ModelSpec spec;
  DataConfig data;
  PartitionConfig partition;  // partition.seed is derived from `seed`
  TrainConfig train;          // train.seed is derived per client and round
  MetaParams meta;
  std::size_t rounds = 1;
  AggregatorMode mode = AggregatorMode::metafl_closed;
  std::vector<double> alpha_grid;  // empty: keep meta.alpha fixed
  std::uint64_t seed = 0;
  std::optional<double> target_accuracy;
  double log_h = 0.0;                // hypothesis-class complexity for the bound
  std::size_t diagnose_samples = 1000;
  std::size_t threads = 1;

  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct RoundRecord {
  std::size_t round = 0;
  WeightVector weights = WeightVector::uniform(1);
  double alpha_used = 0.0;
  double global_val_loss = 0.0;
  double global_val_accuracy = 0.0;
  std::vector<double> per_client_val_loss;
  double phi_value = 0.0;
  std::int64_t wall_ms = 0;
};

/// Everything a run needs before the first round.
struct FederatedData {
  ClientDataset global_val;
  std::vector<ClientSplit> clients;
  ParamVector theta0;
};

struct ExperimentResult {
  ParamVector final_theta;
  std::vector<RoundRecord> history;
  std::vector<double> final_errors;  // composite errors of the last round
};

/// Builds the dataset, the server holdout, the client partition (with label
/// noise applied) and the initial global model.
FederatedData prepare_federation(const ExperimentConfig& cfg);

/// Local train / evaluate / extract for every client, starting from `theta`.
std::vector<ClientReport> collect_reports(const ExperimentConfig& cfg, const FederatedData& data,
                                          const ParamVector& theta, std::size_t round);

ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data);

/// First 1-based round whose global accuracy reaches `target`.
std::optional<std::size_t> rounds_to_target(const std::vector<RoundRecord>& history,
                                            double target);

struct PairedRound {
  std::size_t round = 0;
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double loss_a = 0.0;
  double loss_b = 0.0;
};

struct ComparisonSummary {
  double target_accuracy = 0.0;
  std::vector<PairedRound> rounds{};
  std::optional<std::size_t> rounds_to_target_a{};  // nullopt: not reached
  std::optional<std::size_t> rounds_to_target_b{};
  double terminal_accuracy_a = 0.0;
  double terminal_accuracy_b = 0.0;
  double mean_terminal_accuracy_diff = 0.0;  // a - b
  std::string winner{};                      // "a", "b" or "tie"
  ExperimentResult result_a;
  ExperimentResult result_b;
};

/// True when both configs describe the same data, model and training setup.
bool same_data_setup(const ExperimentConfig& a, const ExperimentConfig& b);

/// Runs both configs on the same data. The target accuracy is
/// cfg_a.target_accuracy when set, otherwise run b's terminal accuracy.
ComparisonSummary compare_runs(const ExperimentConfig& cfg_a, const ExperimentConfig& cfg_b);

/// Mean KL(p_k || p_avg) between client label distributions and their
/// unweighted average.
double kl_divergence_diagnostic(std::span<const ClientDataset> clients, std::size_t num_classes);

}  // namespace metafl
