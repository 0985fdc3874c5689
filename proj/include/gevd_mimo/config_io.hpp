#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gevd_mimo/harness.hpp"

namespace gevd_mimo {

/// Malformed config text, unknown key, or wrongly typed value. The message
/// carries the key and, when known, the line.
class ConfigParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Reads a YAML (or JSON) experiment config. Missing keys keep the desk-scale
/// defaults. A document whose root has a `config` map (an emitted
/// results.json) is read from that map. Overrides are `dotted.key=value`
/// strings applied after the file. The result is validated.
ExperimentConfig parse_config(const std::filesystem::path& path,
                              std::span<const std::string> overrides = {});
ExperimentConfig parse_config_text(const std::string& text,
                                   std::span<const std::string> overrides = {},
                                   const std::string& source = "<config>");

nlohmann::json config_to_json(const ExperimentConfig& config);

inline constexpr const char* kResultsCsvHeader =
    "estimator,sweep_variable,sweep_value,nmse,nmse_db,runs,fallbacks";

std::string results_csv(const SweepResult& results);
nlohmann::json results_json(const SweepResult& results, const ExperimentConfig& config);
/// Reads the rows back from results_json output.
SweepResult results_from_json(const nlohmann::json& doc);
/// Estimators ranked by NMSE for every sweep value.
std::string summary_text(const SweepResult& results);

/// Writes results.csv, results.json and summary.txt into output_dir.
void emit_results(const SweepResult& results, const ExperimentConfig& config,
                  const std::filesystem::path& output_dir);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> issues;
  std::size_t covariance_matrices = 0;
  double memory_bytes = 0.0;
  double runtime_seconds = 0.0;
  std::string text;
};

/// Checks the config invariants, dry-runs geometry and covariance
/// construction at N <= 8, and estimates memory and runtime of the full run.
/// Never throws for a bad config; problems are listed in `issues`.
ValidationReport validate(const ExperimentConfig& config);

/// One line per estimator kind.
std::string describe_estimators();

}  // namespace gevd_mimo
