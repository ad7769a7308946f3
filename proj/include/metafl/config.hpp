#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metafl/federation.hpp"

namespace metafl {

/// Parses the flat `section.key = value` format. Throws ConfigError naming
/// the offending key on unknown keys, bad values or missing required keys.
ExperimentConfig parse_config(std::string_view text);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form: every key, sorted, full precision.
/// parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Built-in named configurations.
std::optional<std::string> preset_text(std::string_view name);
std::vector<std::string> preset_names();

/// Resolves a preset name or a file path.
ExperimentConfig resolve_config(const std::string& name_or_path);

}  // namespace metafl
