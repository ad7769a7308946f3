#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "metafl/cli.hpp"
#include "metafl/config.hpp"
#include "metafl/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"metafl: federated learning simulator with a meta-aggregator"};
  app.require_subcommand(1);

  std::string config;
  std::string config_b;
  std::string out_dir;
  bool no_timing = false;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config, "Config file or preset name")->required();
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->add_flag("--no-timing", no_timing, "Omit the wall_ms column from rounds.csv");

  auto* compare = app.add_subcommand("compare", "Run two configs on the same data");
  compare->add_option("config_a", config, "First config or preset")->required();
  compare->add_option("config_b", config_b, "Second config or preset")->required();
  compare->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Contraction, convexity and KL diagnostics");
  diagnose->add_option("config", config, "Config file or preset name")->required();
  diagnose->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* presets = app.add_subcommand("presets", "List built-in presets");
  std::string preset_name;
  auto* show = app.add_subcommand("show-preset", "Print a built-in preset");
  show->add_option("name", preset_name, "Preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return metafl::cli::kExitConfig;
  }

  if (*run) return metafl::cli::cmd_run(config, out_dir, no_timing);
  if (*compare) return metafl::cli::cmd_compare(config, config_b, out_dir);
  if (*diagnose) return metafl::cli::cmd_diagnose(config, out_dir);
  if (*presets) {
    for (const auto& name : metafl::preset_names()) std::cout << name << '\n';
    return metafl::cli::kExitOk;
  }
  if (*show) {
    if (auto text = metafl::preset_text(preset_name)) {
      std::cout << *text;
      return metafl::cli::kExitOk;
    }
    std::cerr << "metafl: unknown preset '" << preset_name << "'\n";
    return metafl::cli::kExitConfig;
  }
  return metafl::cli::kExitOk;
}
