#include "metafl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "metafl/config.hpp"
#include "metafl/error.hpp"
#include "metafl/rng.hpp"

namespace metafl::cli {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTagDiagnose = 0x64696167ULL;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

json optional_round(const std::optional<std::size_t>& r) {
  return r ? json(*r) : json(nullptr);
}

std::string round_cell(const std::optional<std::size_t>& r) {
  return r ? std::to_string(*r) : std::string("not_reached");
}

Solver solver_for(AggregatorMode m) {
  return m == AggregatorMode::metafl_projected ? Solver::projected : Solver::mirror;
}

std::vector<ClientDataset> client_datasets(const FederatedData& data) {
  std::vector<ClientDataset> out;
  for (const auto& c : data.clients) {
    const ClientDataset parts[] = {c.train, c.val};
    out.push_back(ClientDataset::concat(parts));
  }
  return out;
}

std::size_t total_samples(const FederatedData& data) {
  std::size_t m = 0;
  for (const auto& c : data.clients) m += c.train.size() + c.val.size();
  return m;
}

// Runs `body`, mapping failures onto the documented exit codes.
template <typename Body>
int guarded(Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "metafl: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "metafl: data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "metafl: error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

std::string summary_text(const ExperimentConfig& cfg, const FederatedData& data,
                         const ExperimentResult& result) {
  const auto& last = result.history.back();
  const double target = cfg.target_accuracy.value_or(last.global_val_accuracy);

  MetaParams mp = cfg.meta;
  mp.alpha = last.alpha_used;
  Rng rng(derive_seed(cfg.seed, kTagDiagnose));
  const double contraction = contraction_estimate(result.final_errors, mp, cfg.diagnose_samples,
                                                  rng, solver_for(cfg.mode));
  const auto clients = client_datasets(data);
  const double kl = kl_divergence_diagnostic(clients, cfg.spec.num_classes);

  json j;
  j["terminal_accuracy"] = last.global_val_accuracy;
  j["terminal_loss"] = last.global_val_loss;
  j["rounds_to_target"] = optional_round(rounds_to_target(result.history, target));
  j["weights_final"] = last.weights.values();
  j["alpha_final"] = last.alpha_used;
  j["contraction_estimate"] = contraction;
  j["kl_diagnostic"] = kl;
  j["generalization_bound"] = generalization_bound(cfg.log_h, total_samples(data), kl);
  return j.dump(2) + "\n";
}

}  // namespace

ExperimentConfig load_with_overrides(const std::string& name_or_path) {
  ExperimentConfig cfg = resolve_config(name_or_path);
  if (const char* env = std::getenv("METAFL_SEED"); env && *env) {
    const std::string text(env);
    std::size_t pos = 0;
    unsigned long long seed = 0;
    try {
      seed = std::stoull(text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != text.size() || text.front() == '-') {
      throw ConfigError("METAFL_SEED: invalid value '" + text + "'");
    }
    cfg.seed = seed;
  }
  return cfg;
}

std::string rounds_csv(const std::vector<RoundRecord>& history, bool include_timing) {
  std::string out = "round,alpha_used,global_val_loss,global_val_accuracy,phi_value";
  const std::size_t k = history.empty() ? 0 : history.front().weights.size();
  for (std::size_t i = 0; i < k; ++i) out += ",w_" + std::to_string(i);
  for (std::size_t i = 0; i < k; ++i) out += ",val_loss_" + std::to_string(i);
  if (include_timing) out += ",wall_ms";
  out += '\n';
  for (const auto& r : history) {
    out += std::to_string(r.round) + ',' + fmt(r.alpha_used) + ',' + fmt(r.global_val_loss) +
           ',' + fmt(r.global_val_accuracy) + ',' + fmt(r.phi_value);
    for (double w : r.weights.values()) out += ',' + fmt(w);
    for (double l : r.per_client_val_loss) out += ',' + fmt(l);
    if (include_timing) out += ',' + std::to_string(r.wall_ms);
    out += '\n';
  }
  return out;
}

std::string compare_csv(const ComparisonSummary& s) {
  std::string out =
      "round,accuracy_a,accuracy_b,accuracy_diff,loss_a,loss_b,loss_diff,"
      "rounds_to_target_a,rounds_to_target_b\n";
  const std::string rt_a = round_cell(s.rounds_to_target_a);
  const std::string rt_b = round_cell(s.rounds_to_target_b);
  for (const auto& r : s.rounds) {
    out += std::to_string(r.round) + ',' + fmt(r.accuracy_a) + ',' + fmt(r.accuracy_b) + ',' +
           fmt(r.accuracy_a - r.accuracy_b) + ',' + fmt(r.loss_a) + ',' + fmt(r.loss_b) + ',' +
           fmt(r.loss_a - r.loss_b) + ',' + rt_a + ',' + rt_b + '\n';
  }
  return out;
}

std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  return summary_text(cfg, prepare_federation(cfg), result);
}

Diagnostics diagnose(const ExperimentConfig& cfg) {
  const FederatedData data = prepare_federation(cfg);
  const auto reports = collect_reports(cfg, data, data.theta0, 1);
  const auto errors = cohort_errors(reports, cfg.meta.c);

  Diagnostics d;
  Rng rng(derive_seed(cfg.seed, kTagDiagnose));
  d.contraction_estimate =
      contraction_estimate(errors, cfg.meta, cfg.diagnose_samples, rng, solver_for(cfg.mode));

  std::vector<ParamVector> thetas;
  for (const auto& r : reports) thetas.push_back(r.theta_k);
  const WeightVector w = weights_closed_form(errors, cfg.meta.alpha);
  d.jensen_gap = jensen_gap(cfg.spec, thetas, w, data.global_val);

  d.kl_diagnostic = kl_divergence_diagnostic(client_datasets(data), cfg.spec.num_classes);
  d.total_samples = total_samples(data);
  d.generalization_bound = generalization_bound(cfg.log_h, d.total_samples, d.kl_diagnostic);
  return d;
}

int cmd_run(const std::string& config, const std::filesystem::path& out_dir, bool no_timing) {
  return guarded([&] {
    const ExperimentConfig cfg = load_with_overrides(config);
    const FederatedData data = prepare_federation(cfg);
    const ExperimentResult result = run_experiment(cfg, data);
    prepare_dir(out_dir);
    write_file(out_dir / "rounds.csv", rounds_csv(result.history, !no_timing));
    write_file(out_dir / "summary.json", summary_text(cfg, data, result));
    write_file(out_dir / "config_echo.cfg", serialize_config(cfg));
    const auto& last = result.history.back();
    std::cout << "rounds: " << result.history.size()
              << "  terminal accuracy: " << fmt(last.global_val_accuracy)
              << "  terminal loss: " << fmt(last.global_val_loss) << '\n';
  });
}

int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::filesystem::path& out_dir) {
  return guarded([&] {
    const ExperimentConfig a = load_with_overrides(config_a);
    const ExperimentConfig b = load_with_overrides(config_b);
    const ComparisonSummary s = compare_runs(a, b);
    prepare_dir(out_dir);
    write_file(out_dir / "compare.csv", compare_csv(s));

    json j;
    j["target_accuracy"] = s.target_accuracy;
    j["terminal_accuracy_a"] = s.terminal_accuracy_a;
    j["terminal_accuracy_b"] = s.terminal_accuracy_b;
    j["mean_terminal_accuracy_diff"] = s.mean_terminal_accuracy_diff;
    j["rounds_to_target_a"] = optional_round(s.rounds_to_target_a);
    j["rounds_to_target_b"] = optional_round(s.rounds_to_target_b);
    j["winner"] = s.winner;
    write_file(out_dir / "compare_summary.json", j.dump(2) + "\n");
    std::cout << "winner: " << s.winner << "  terminal accuracy a=" << fmt(s.terminal_accuracy_a)
              << " b=" << fmt(s.terminal_accuracy_b) << '\n';
  });
}

int cmd_diagnose(const std::string& config, const std::filesystem::path& out_dir) {
  return guarded([&] {
    const ExperimentConfig cfg = load_with_overrides(config);
    const Diagnostics d = diagnose(cfg);
    prepare_dir(out_dir);
    json j;
    j["contraction_estimate"] = d.contraction_estimate;
    j["jensen_gap"] = d.jensen_gap;
    j["kl_diagnostic"] = d.kl_diagnostic;
    j["generalization_bound"] = d.generalization_bound;
    j["total_samples"] = d.total_samples;
    j["log_h"] = cfg.log_h;
    j["solver"] = std::string(to_string(solver_for(cfg.mode)));
    write_file(out_dir / "diagnostics.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << '\n';
  });
}

}  // namespace metafl::cli
