#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metafl/federation.hpp"

namespace metafl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Loads a config (preset name or path) and applies the METAFL_SEED override.
ExperimentConfig load_with_overrides(const std::string& name_or_path);

std::string rounds_csv(const std::vector<RoundRecord>& history, bool include_timing);
std::string compare_csv(const ComparisonSummary& summary);
std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result);

struct Diagnostics {
  double contraction_estimate = 0.0;
  double jensen_gap = 0.0;
  double kl_diagnostic = 0.0;
  double generalization_bound = 0.0;
  std::size_t total_samples = 0;
};

/// Diagnostics on the first-round cohort of a freshly prepared federation.
Diagnostics diagnose(const ExperimentConfig& cfg);

int cmd_run(const std::string& config, const std::filesystem::path& out_dir, bool no_timing);
int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::filesystem::path& out_dir);
int cmd_diagnose(const std::string& config, const std::filesystem::path& out_dir);

}  // namespace metafl::cli
