#include "gevd_mimo/config_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include <yaml-cpp/yaml.h>

#include "gevd_mimo/channel.hpp"

namespace gevd_mimo {

namespace {

using SystemField = std::variant<int SystemConfig::*, double SystemConfig::*>;

const std::map<std::string, SystemField, std::less<>>& system_fields() {
  static const std::map<std::string, SystemField, std::less<>> kFields = {
      {"num_cells", &SystemConfig::num_cells},
      {"ues_per_cell", &SystemConfig::ues_per_cell},
      {"antennas", &SystemConfig::antennas},
      {"tau_p", &SystemConfig::tau_p},
      {"tau_u", &SystemConfig::tau_u},
      {"coherence_blocks", &SystemConfig::coherence_blocks},
      {"evaluation_blocks", &SystemConfig::evaluation_blocks},
      {"ue_power", &SystemConfig::ue_power},
      {"noise_power", &SystemConfig::noise_power},
      {"cell_radius", &SystemConfig::cell_radius},
      {"ue_ring_radius", &SystemConfig::ue_ring_radius},
      {"pathloss_exponent", &SystemConfig::pathloss_exponent},
      {"angular_half_spread_deg", &SystemConfig::angular_half_spread_deg},
      {"jammer_power", &SystemConfig::jammer_power},
      {"jammer_angle_deg", &SystemConfig::jammer_angle_deg},
      {"loading_factor", &SystemConfig::loading_factor},
  };
  return kFields;
}

std::string where(const YAML::Node& node, const std::string& source) {
  const auto mark = node.Mark();
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

template <typename T>
T read(const YAML::Node& node, const std::string& key, const std::string& source) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigParseError(where(node, source) + ": key '" + key + "' has an invalid value");
  }
}

bool is_known_key(const std::string& key) {
  static const char* kTopLevel[] = {"estimators", "monte_carlo_runs", "seed", "sweep.variable",
                                    "sweep.values"};
  if (std::find(std::begin(kTopLevel), std::end(kTopLevel), key) != std::end(kTopLevel)) return true;
  constexpr std::string_view kPrefix = "system.";
  return key.starts_with(kPrefix) && system_fields().contains(key.substr(kPrefix.size()));
}

SweepVariable parse_sweep_variable(const std::string& s, const YAML::Node& node, const std::string& source) {
  if (s == "T") return SweepVariable::kBlocks;
  if (s == "tau_p") return SweepVariable::kTauP;
  throw ConfigParseError(where(node, source) + ": key 'sweep.variable' must be 'T' or 'tau_p'");
}

ExperimentConfig from_yaml(YAML::Node root, const std::string& source) {
  ExperimentConfig c = desk_scale_experiment();
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigParseError(source + ": config root must be a map");
  if (root["config"] && root["config"].IsMap()) root = root["config"];

  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    const YAML::Node& value = entry.second;
    if (key == "system") {
      if (!value.IsMap()) throw ConfigParseError(where(value, source) + ": 'system' must be a map");
      for (const auto& field : value) {
        const auto name = field.first.as<std::string>();
        const auto it = system_fields().find(name);
        if (it == system_fields().end()) {
          throw ConfigParseError(where(field.first, source) + ": unknown key 'system." + name + "'");
        }
        const std::string full = "system." + name;
        std::visit(
            [&](auto member) {
              using T = std::remove_reference_t<decltype(c.system.*member)>;
              c.system.*member = read<T>(field.second, full, source);
            },
            it->second);
      }
    } else if (key == "estimators") {
      if (!value.IsSequence()) {
        throw ConfigParseError(where(value, source) + ": 'estimators' must be a list");
      }
      c.estimators.clear();
      for (const auto& item : value) {
        c.estimators.push_back(parse_estimator_spec(read<std::string>(item, "estimators", source)));
      }
    } else if (key == "sweep") {
      if (!value.IsMap()) throw ConfigParseError(where(value, source) + ": 'sweep' must be a map");
      for (const auto& field : value) {
        const auto name = field.first.as<std::string>();
        if (name == "variable") {
          c.sweep.variable =
              parse_sweep_variable(read<std::string>(field.second, "sweep.variable", source), field.second, source);
        } else if (name == "values") {
          c.sweep.values = read<std::vector<int>>(field.second, "sweep.values", source);
        } else {
          throw ConfigParseError(where(field.first, source) + ": unknown key 'sweep." + name + "'");
        }
      }
    } else if (key == "monte_carlo_runs") {
      c.monte_carlo_runs = read<int>(value, key, source);
    } else if (key == "seed") {
      c.master_seed = read<std::uint64_t>(value, key, source);
    } else {
      throw ConfigParseError(where(entry.first, source) + ": unknown key '" + key + "'");
    }
  }
  return c;
}

void apply_override(YAML::Node& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigParseError("override '" + text + "' is not of the form key=value");
  }
  const std::string key = text.substr(0, eq);
  std::string value = text.substr(eq + 1);
  if (!is_known_key(key)) throw ConfigParseError("override references unknown key '" + key + "'");
  if ((key == "sweep.values" || key == "estimators") && !value.starts_with('[')) {
    value = "[" + value + "]";
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigParseError("override '" + key + "': " + e.msg);
  }
  if (root["config"] && root["config"].IsMap()) {
    YAML::Node inner = root["config"];
    apply_override(inner, text);
    return;
  }
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    root[key] = parsed;
  } else {
    YAML::Node section = root[key.substr(0, dot)];
    if (section && !section.IsMap()) {
      throw ConfigParseError("override '" + key + "': parent section is not a map");
    }
    root[key.substr(0, dot)][key.substr(dot + 1)] = parsed;
  }
}

ExperimentConfig parse_loaded(YAML::Node root, std::span<const std::string> overrides,
                              const std::string& source) {
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) apply_override(root, o);
  ExperimentConfig c = from_yaml(root, source);
  validate_experiment(c);
  return c;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path.string() + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides, path.string());
}

ExperimentConfig parse_config_text(const std::string& text, std::span<const std::string> overrides,
                                   const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigParseError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return parse_loaded(root, overrides, source);
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json system = nlohmann::json::object();
  for (const auto& [name, member] : system_fields()) {
    std::visit([&](auto m) { system[name] = config.system.*m; }, member);
  }
  nlohmann::json estimators = nlohmann::json::array();
  for (const auto& e : config.estimators) estimators.push_back(format_estimator_spec(e));
  return {
      {"system", system},
      {"estimators", estimators},
      {"sweep", {{"variable", to_string(config.sweep.variable)}, {"values", config.sweep.values}}},
      {"monte_carlo_runs", config.monte_carlo_runs},
      {"seed", config.master_seed},
  };
}

std::string results_csv(const SweepResult& results) {
  std::string out = kResultsCsvHeader;
  out += '\n';
  for (const auto& row : results.rows) {
    out += row.estimator.label() + ',' + to_string(row.sweep_variable) + ',' +
           std::to_string(row.sweep_value) + ',' + format_double(row.nmse) + ',' +
           format_double(row.nmse_db) + ',' + std::to_string(row.runs) + ',' +
           std::to_string(row.fallbacks) + '\n';
  }
  return out;
}

nlohmann::json results_json(const SweepResult& results, const ExperimentConfig& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : results.rows) {
    rows.push_back({
        {"estimator", row.estimator.label()},
        {"spec", format_estimator_spec(row.estimator)},
        {"sweep_variable", to_string(row.sweep_variable)},
        {"sweep_value", row.sweep_value},
        {"nmse", row.nmse},
        {"nmse_db", row.nmse_db},
        {"runs", row.runs},
        {"fallbacks", row.fallbacks},
        {"per_run_nmse", row.per_run_nmse},
    });
  }
  return {
      {"master_seed", config.master_seed},
      {"config", config_to_json(config)},
      {"columns", {"estimator", "sweep_variable", "sweep_value", "nmse", "nmse_db", "runs", "fallbacks"}},
      {"rows", rows},
  };
}

SweepResult results_from_json(const nlohmann::json& doc) {
  SweepResult out;
  for (const auto& r : doc.at("rows")) {
    NmseResult row;
    row.estimator = parse_estimator_spec(r.at("spec").get<std::string>());
    row.sweep_variable =
        r.at("sweep_variable").get<std::string>() == "T" ? SweepVariable::kBlocks : SweepVariable::kTauP;
    row.sweep_value = r.at("sweep_value").get<int>();
    row.nmse = r.at("nmse").get<double>();
    row.nmse_db = r.at("nmse_db").is_number() ? r.at("nmse_db").get<double>() : -INFINITY;
    row.runs = r.at("runs").get<int>();
    row.fallbacks = r.at("fallbacks").get<int>();
    row.per_run_nmse = r.at("per_run_nmse").get<std::vector<double>>();
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string summary_text(const SweepResult& results) {
  std::map<int, std::vector<const NmseResult*>> by_value;
  std::vector<int> order;
  for (const auto& row : results.rows) {
    if (!by_value.contains(row.sweep_value)) order.push_back(row.sweep_value);
    by_value[row.sweep_value].push_back(&row);
  }
  std::ostringstream out;
  if (results.rows.empty()) {
    out << "no results\n";
    return out.str();
  }
  for (int v : order) {
    auto rows = by_value[v];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const NmseResult* a, const NmseResult* b) { return a->nmse < b->nmse; });
    out << to_string(rows.front()->sweep_variable) << " = " << v << '\n';
    int rank = 1;
    for (const auto* r : rows) {
      char line[160];
      std::snprintf(line, sizeof line, "  %2d. %-18s %9.3f dB  (nmse %.6g, runs %d, fallbacks %d)\n", rank++,
                    r->estimator.label().c_str(), r->nmse_db, r->nmse, r->runs, r->fallbacks);
      out << line;
    }
  }
  return out.str();
}

void emit_results(const SweepResult& results, const ExperimentConfig& config,
                  const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + output_dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    const auto path = output_dir / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw IoError("cannot write " + path.string());
  };
  write("results.csv", results_csv(results));
  write("results.json", results_json(results, config).dump(2) + "\n");
  write("summary.txt", summary_text(results));
}

ValidationReport validate(const ExperimentConfig& config) {
  ValidationReport report;
  try {
    validate_experiment(config);
  } catch (const ConfigInvalid& e) {
    report.issues.push_back(std::string("ConfigInvalid: ") + e.what());
  }

  const SystemConfig& s = config.system;
  SystemConfig dry = s;
  dry.antennas = std::clamp(s.antennas, 1, 8);
  try {
    const auto geometry = build_geometry(dry, config.master_seed);
    const auto stats = ChannelStatistics::from_geometry(geometry, dry, {0});
    for (int l = 0; l < dry.num_cells; ++l) {
      for (int k = 0; k < dry.ues_per_cell; ++k) {
        const auto& r = stats.covariance(0, l, k);
        if (!(r.trace() > 0.0)) report.issues.push_back("dry run: covariance with zero trace");
      }
    }
  } catch (const UnsupportedLayout& e) {
    report.issues.push_back(std::string("UnsupportedLayout: ") + e.what());
  } catch (const Error& e) {
    report.issues.push_back(std::string("dry run failed: ") + e.what());
  }

  // Center-BS covariances and their sampling factors dominate memory.
  const double n = std::max(s.antennas, 0);
  report.covariance_matrices = static_cast<std::size_t>(std::max(s.num_cells * s.ues_per_cell, 0));
  const double matrix_bytes = n * n * 16.0;
  report.memory_bytes = static_cast<double>(report.covariance_matrices) * matrix_bytes * 2.0;

  // Complex multiply-accumulates per simulated block, at ~1 GMAC/s.
  double total_macs = 0.0;
  for (int v : config.sweep.values) {
    const SystemConfig p = apply_sweep_value(s, config.sweep.variable, v);
    const double links = p.num_cells * p.ues_per_cell;
    const double per_block = links * n * n + n * links * p.tau_c() + 2.0 * n * n * p.tau_c();
    const double blocks = p.coherence_blocks + 2.0 * p.evaluation_blocks;
    const double filters = p.evaluation_blocks * p.ues_per_cell * n * n * n;
    total_macs += config.monte_carlo_runs * (blocks * per_block + filters + links * n * 4000.0);
  }
  report.runtime_seconds = total_macs / 1e9;
  report.ok = report.issues.empty();

  std::ostringstream out;
  out << (report.ok ? "OK" : "INVALID") << '\n';
  for (const auto& issue : report.issues) out << "  issue: " << issue << '\n';
  char line[200];
  std::snprintf(line, sizeof line, "  memory: %zu covariance matrices of %dx%d complex, ~%.1f MB with sampling factors\n",
                report.covariance_matrices, s.antennas, s.antennas, report.memory_bytes / 1e6);
  out << line;
  std::snprintf(line, sizeof line, "  runtime: ~%.0f s single-threaded (%zu sweep values x %d runs)\n",
                report.runtime_seconds, config.sweep.values.size(), config.monte_carlo_runs);
  out << line;
  report.text = out.str();
  return report;
}

std::string describe_estimators() {
  return "ls_fixed         least squares on the despread pilot, fixed cyclic pilots\n"
         "mmse_fixed       MMSE with true covariances, fixed cyclic pilots (lower bound)\n"
         "mmse_random      MMSE with true covariances, random pilots\n"
         "subt             MMSE form with the subtraction covariance estimate\n"
         "gevd:<R>         low-rank approximate MMSE from the GEVD covariance estimate\n"
         "gevd_impr:<R>    approximate MMSE using the intra-cell pilot choices per block\n";
}

}  // namespace gevd_mimo
