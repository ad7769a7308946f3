#include "metafl/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>

#include "metafl/error.hpp"
#include "metafl/rng.hpp"

namespace metafl {
namespace {

// Seed-derivation tags; one independent stream per purpose.
constexpr std::uint64_t kTagData = 1;
constexpr std::uint64_t kTagHoldout = 2;
constexpr std::uint64_t kTagPartition = 3;
constexpr std::uint64_t kTagInit = 4;
constexpr std::uint64_t kTagTrain = 5;

template <typename Fn>
void check_section(const char* section, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

[[noreturn]] void rethrow_with_context(std::exception_ptr eptr, const std::string& context) {
  try {
    std::rethrow_exception(eptr);
  } catch (const NumericalError& e) {
    throw NumericalError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const DataError& e) {
    throw DataError(context + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + e.what());
  } catch (const std::exception& e) {
    throw Error(context + e.what());
  }
}

AggregationMode aggregation_mode(AggregatorMode m) {
  switch (m) {
    case AggregatorMode::metafl_mirror: return AggregationMode::iterative_mirror;
    case AggregatorMode::metafl_projected: return AggregationMode::iterative_projected;
    default: return AggregationMode::closed_form;
  }
}

ClientReport run_client(const ExperimentConfig& cfg, const ClientSplit& split,
                        const ParamVector& theta, std::size_t round, std::size_t k) {
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, kTagTrain, round, k);
  ParamVector theta_k = train_local(cfg.spec, theta, split.train, tc);
  PerformanceMetrics perf = evaluate(cfg.spec, theta_k, split.train, split.val);
  MetaFeatures meta = extract(cfg.spec, theta, theta_k, split.train, split.val, tc);
  return {k, std::move(theta_k), perf, meta, split.train.size()};
}

}  // namespace

std::string_view to_string(AggregatorMode m) {
  switch (m) {
    case AggregatorMode::metafl_closed: return "metafl_closed";
    case AggregatorMode::metafl_mirror: return "metafl_mirror";
    case AggregatorMode::metafl_projected: return "metafl_projected";
    case AggregatorMode::fedavg: return "fedavg";
  }
  return "unknown";
}

AggregatorMode aggregator_mode_from_string(std::string_view name) {
  for (auto m : {AggregatorMode::metafl_closed, AggregatorMode::metafl_mirror,
                 AggregatorMode::metafl_projected, AggregatorMode::fedavg}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown aggregator mode '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  check_section("model", [&] { spec.validate(); });
  check_section("partition", [&] { partition.validate(); });
  check_section("train", [&] { train.validate(); });
  check_section("meta", [&] { meta.validate(); });
  if (rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (!(data.global_val_fraction > 0.0 && data.global_val_fraction < 1.0)) {
    throw ConfigError("data.global_val_fraction: must be in (0, 1)");
  }
  if (data.source == DataSource::blobs) {
    if (data.samples < spec.num_classes) throw ConfigError("data.samples: too few samples");
    if (!(data.spread > 0.0) || !std::isfinite(data.spread)) {
      throw ConfigError("data.spread: must be positive");
    }
  } else if (data.csv_path.empty()) {
    throw ConfigError("data.csv_path: required when data.source = csv");
  }
  for (double a : alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ConfigError("aggregator.alpha_grid: entries must be finite and >= 0");
    }
  }
  if (target_accuracy && !(*target_accuracy >= 0.0 && *target_accuracy <= 1.0)) {
    throw ConfigError("report.target_accuracy: must be in [0, 1]");
  }
  if (!(log_h >= 0.0) || !std::isfinite(log_h)) throw ConfigError("diagnose.log_h: must be >= 0");
  if (diagnose_samples < 1) throw ConfigError("diagnose.samples: must be >= 1");
  if (threads < 1) throw ConfigError("runtime.threads: must be >= 1");
}

FederatedData prepare_federation(const ExperimentConfig& cfg) {
  cfg.validate();
  ClientDataset all =
      cfg.data.source == DataSource::csv
          ? load_csv(cfg.data.csv_path, cfg.spec.num_classes, cfg.data.csv_header)
          : make_blobs(cfg.spec.num_classes, cfg.spec.input_dim, cfg.data.samples,
                       cfg.data.spread, derive_seed(cfg.seed, kTagData));
  if (all.dim() != cfg.spec.input_dim) {
    throw ConfigError("model.input_dim: data has " + std::to_string(all.dim()) + " features");
  }
  auto [pool, global_val] =
      holdout_split(all, cfg.data.global_val_fraction, derive_seed(cfg.seed, kTagHoldout));

  PartitionConfig pc = cfg.partition;
  pc.seed = derive_seed(cfg.seed, kTagPartition);
  auto clients = partition_dirichlet(pool, pc);
  apply_partition_noise(clients, pc);

  return {std::move(global_val), std::move(clients),
          init_params(cfg.spec, derive_seed(cfg.seed, kTagInit))};
}

std::vector<ClientReport> collect_reports(const ExperimentConfig& cfg, const FederatedData& data,
                                          const ParamVector& theta, std::size_t round) {
  const std::size_t k_clients = data.clients.size();
  std::vector<std::optional<ClientReport>> slots(k_clients);
  std::vector<std::exception_ptr> failures(k_clients);

  auto work = [&](std::size_t k) {
    try {
      slots[k] = run_client(cfg, data.clients[k], theta, round, k);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(cfg.threads, k_clients);
  if (workers <= 1) {
    for (std::size_t k = 0; k < k_clients; ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < k_clients; k = next++) work(k);
      });
    }
  }  // jthreads join here

  std::vector<ClientReport> reports;
  reports.reserve(k_clients);
  for (std::size_t k = 0; k < k_clients; ++k) {
    if (failures[k]) {
      rethrow_with_context(failures[k], "round " + std::to_string(round) + ", client " +
                                            std::to_string(k) + ": ");
    }
    reports.push_back(std::move(*slots[k]));
  }
  return reports;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, prepare_federation(cfg));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data) {
  cfg.validate();
  ParamVector theta = data.theta0;
  MetaParams mp = cfg.meta;
  const AggregationMode agg_mode = aggregation_mode(cfg.mode);
  std::vector<RoundRecord> history;
  std::vector<double> errors;

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto started = std::chrono::steady_clock::now();
    const auto reports = collect_reports(cfg, data, theta, round);

    RoundRecord rec;
    rec.round = round;
    try {
      errors = cohort_errors(reports, mp.c);
      if (cfg.mode == AggregatorMode::fedavg) {
        std::vector<std::size_t> n;
        for (const auto& r : reports) n.push_back(r.n_k);
        rec.weights = fedavg_weights(n);
        theta = aggregate(reports, rec.weights, 0.0);
        const double tau = mp.effective_tau();
        rec.phi_value = phi_objective(rec.weights, errors, std::isfinite(tau) ? tau : 0.0);
      } else {
        if (!cfg.alpha_grid.empty()) {
          mp = adapt_meta_params(mp, cfg.alpha_grid, reports, cfg.spec, data.global_val,
                                 agg_mode);
        }
        auto outcome = meta_agg(reports, errors, mp, agg_mode);
        rec.weights = std::move(outcome.weights);
        rec.phi_value = outcome.phi_value;
        theta = std::move(outcome.theta_g);
      }
    } catch (...) {
      rethrow_with_context(std::current_exception(),
                           "round " + std::to_string(round) + ", aggregation: ");
    }

    rec.alpha_used = mp.alpha;
    const auto global = evaluate(cfg.spec, theta, data.global_val);
    rec.global_val_loss = global.val_loss;
    rec.global_val_accuracy = global.val_accuracy;
    for (const auto& r : reports) rec.per_client_val_loss.push_back(r.perf.val_loss);
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - started)
                      .count();
    history.push_back(std::move(rec));
  }
  return {std::move(theta), std::move(history), std::move(errors)};
}

std::optional<std::size_t> rounds_to_target(const std::vector<RoundRecord>& history,
                                            double target) {
  for (const auto& rec : history) {
    if (rec.global_val_accuracy >= target) return rec.round;
  }
  return std::nullopt;
}

bool same_data_setup(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.spec == b.spec && a.data == b.data && a.partition == b.partition &&
         a.train == b.train && a.rounds == b.rounds && a.seed == b.seed;
}

ComparisonSummary compare_runs(const ExperimentConfig& cfg_a, const ExperimentConfig& cfg_b) {
  if (!same_data_setup(cfg_a, cfg_b)) throw ConfigError("configs must share data setup");
  cfg_b.validate();
  const FederatedData data = prepare_federation(cfg_a);

  ExperimentResult result_a = run_experiment(cfg_a, data);
  ExperimentResult result_b = run_experiment(cfg_b, data);
  ComparisonSummary s{.result_a = std::move(result_a), .result_b = std::move(result_b)};
  const auto& ha = s.result_a.history;
  const auto& hb = s.result_b.history;

  s.terminal_accuracy_a = ha.back().global_val_accuracy;
  s.terminal_accuracy_b = hb.back().global_val_accuracy;
  s.target_accuracy = cfg_a.target_accuracy.value_or(s.terminal_accuracy_b);
  for (std::size_t i = 0; i < ha.size(); ++i) {
    s.rounds.push_back({ha[i].round, ha[i].global_val_accuracy, hb[i].global_val_accuracy,
                        ha[i].global_val_loss, hb[i].global_val_loss});
  }
  s.rounds_to_target_a = rounds_to_target(ha, s.target_accuracy);
  s.rounds_to_target_b = rounds_to_target(hb, s.target_accuracy);
  s.mean_terminal_accuracy_diff = s.terminal_accuracy_a - s.terminal_accuracy_b;
  s.winner = s.mean_terminal_accuracy_diff > 0.0   ? "a"
             : s.mean_terminal_accuracy_diff < 0.0 ? "b"
                                                   : "tie";
  return s;
}

double kl_divergence_diagnostic(std::span<const ClientDataset> clients, std::size_t num_classes) {
  if (clients.empty()) throw InvalidArgument("empty cohort");
  std::vector<std::vector<double>> dists;
  std::vector<double> avg(num_classes, 0.0);
  for (const auto& c : clients) {
    dists.push_back(label_distribution(c, num_classes));
    for (std::size_t j = 0; j < num_classes; ++j) avg[j] += dists.back()[j];
  }
  for (double& q : avg) q /= static_cast<double>(clients.size());

  constexpr double kEps = 1e-12;
  double total = 0.0;
  for (const auto& p : dists) {
    double kl = 0.0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      if (p[j] > 0.0) kl += p[j] * std::log(p[j] / std::max(avg[j], kEps));
    }
    total += kl;
  }
  return std::max(0.0, total / static_cast<double>(clients.size()));
}

}  // namespace metafl
