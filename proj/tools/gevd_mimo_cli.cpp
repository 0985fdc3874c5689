// Command-line front end: run sweeps, validate configs, list estimators.
//
//   gevd_mimo run --config exp.yaml [--output out/] [--seed 7] [--set system.tau_p=20 ...]
//   gevd_mimo validate --config exp.yaml
//   gevd_mimo list-estimators
//
// Exit codes: 0 success, 1 config error, 2 runtime numeric failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gevd_mimo/config_io.hpp"
#include "gevd_mimo/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GEVD-based covariance and channel estimation simulator for multicell massive MIMO"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir = "results";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Run the configured sweep and write results");
  run->add_option("--config", config_path, "Experiment config (YAML or JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--output", output_dir, "Output directory")->capture_default_str();
  run->add_option("--seed", seed, "Master seed (overrides the config)");
  run->add_option("--set", overrides, "Override a config key, e.g. system.tau_p=20");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Check a config and estimate its cost");
  validate->add_option("--config", config_path, "Experiment config (YAML or JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("--set", overrides, "Override a config key");

  auto* list = app.add_subcommand("list-estimators", "List the available estimators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  using namespace gevd_mimo;

  if (list->parsed()) {
    std::cout << describe_estimators();
    return 0;
  }

  if (validate->parsed()) {
    // Parse without throwing on invariant violations so the report can list them.
    ExperimentConfig config;
    try {
      config = parse_config(config_path, overrides);
    } catch (const ConfigInvalid& e) {
      std::cout << "INVALID\n  issue: ConfigInvalid: " << e.what() << '\n';
      return kExitConfig;
    } catch (const ConfigParseError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    }
    const auto report = gevd_mimo::validate(config);
    std::cout << report.text;
    return report.ok ? 0 : kExitConfig;
  }

  ExperimentConfig config;
  try {
    config = parse_config(config_path, overrides);
    if (seed) config.master_seed = *seed;
  } catch (const ConfigParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigInvalid& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const SweepResult results = run_sweep(config, threads);
    emit_results(results, config, output_dir);
    std::cout << summary_text(results);
    std::cout << "wrote " << output_dir << "/results.csv, results.json, summary.txt\n";
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
