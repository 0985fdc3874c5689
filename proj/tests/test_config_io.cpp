#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gevd_mimo/config_io.hpp"

using namespace gevd_mimo;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

SweepResult two_rows() {
  SweepResult r;
  NmseResult a;
  a.estimator = {EstimatorKind::kGevd, 8};
  a.sweep_variable = SweepVariable::kBlocks;
  a.sweep_value = 300;
  a.per_run_nmse = {0.1234567890123456, 0.0987654321098765};
  a.nmse = pairwise_mean(a.per_run_nmse);
  a.nmse_db = 10.0 * std::log10(a.nmse);
  a.runs = 2;
  a.fallbacks = 0;
  NmseResult b = a;
  b.estimator = {EstimatorKind::kGevdImproved, 4};
  b.per_run_nmse = {1.0 / 3.0, 2.0 / 7.0};
  b.nmse = pairwise_mean(b.per_run_nmse);
  b.nmse_db = 10.0 * std::log10(b.nmse);
  b.fallbacks = 17;
  r.rows = {a, b};
  return r;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gevd_mimo_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ParseConfig, EmptyMapGivesDeskDefaults) {
  const auto c = parse_config_text("{}");
  EXPECT_EQ(config_to_json(c), config_to_json(desk_scale_experiment()));
}

TEST(ParseConfig, ReadsAllSections) {
  const auto c = parse_config_text(
      "system:\n  antennas: 16\n  noise_power: 0.5\n"
      "estimators: [subt, \"gevd:4\"]\n"
      "sweep:\n  variable: tau_p\n  values: [5, 10]\n"
      "monte_carlo_runs: 3\nseed: 77\n");
  EXPECT_EQ(c.system.antennas, 16);
  EXPECT_EQ(c.system.noise_power, 0.5);
  ASSERT_EQ(c.estimators.size(), 2u);
  EXPECT_EQ(c.estimators[1], (EstimatorSpec{EstimatorKind::kGevd, 4}));
  EXPECT_EQ(c.sweep.variable, SweepVariable::kTauP);
  EXPECT_EQ(c.sweep.values, (std::vector<int>{5, 10}));
  EXPECT_EQ(c.monte_carlo_runs, 3);
  EXPECT_EQ(c.master_seed, 77u);
}

TEST(ParseConfig, OverrideChangesOnlyThatField) {
  const std::vector<std::string> overrides = {"system.tau_p=20"};
  const auto base = parse_config_text("{}");
  const auto c = parse_config_text("{}", overrides);
  EXPECT_EQ(c.system.tau_p, 20);
  auto want = config_to_json(base);
  want["system"]["tau_p"] = 20;
  EXPECT_EQ(config_to_json(c), want);

  const std::vector<std::string> list = {"sweep.values=[50, 60]", "estimators=[ls_fixed]"};
  const auto d = parse_config_text("{}", list);
  EXPECT_EQ(d.sweep.values, (std::vector<int>{50, 60}));
  ASSERT_EQ(d.estimators.size(), 1u);
  EXPECT_EQ(d.estimators[0].kind, EstimatorKind::kLsFixed);
}

TEST(ParseConfig, TauZeroIsConfigInvalid) {
  const std::vector<std::string> overrides = {"system.tau_p=0"};
  try {
    parse_config_text("{}", overrides);
    FAIL() << "expected ConfigInvalid";
  } catch (const ConfigInvalid& e) {
    EXPECT_NE(std::string(e.what()).find("tau_p >= 1"), std::string::npos);
  }
}

TEST(ParseConfig, UnknownKeyNamesKeyAndLine) {
  try {
    parse_config_text("seed: 1\nsystem:\n  antenas: 8\n", {}, "x.yaml");
    FAIL() << "expected ConfigParseError";
  } catch (const ConfigParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("antenas"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x.yaml"), std::string::npos) << msg;
    EXPECT_NE(msg.find('3'), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config_text("bogus: 1\n"), ConfigParseError);
  EXPECT_THROW(parse_config_text("system:\n  antennas: many\n"), ConfigParseError);
  EXPECT_THROW(parse_config_text("sweep:\n  variable: N\n"), ConfigParseError);
  EXPECT_THROW(parse_config_text("system: [\n"), ConfigParseError);
  const std::vector<std::string> bad = {"system.nope=1"};
  EXPECT_THROW(parse_config_text("{}", bad), ConfigParseError);
}

TEST(ParseConfig, ReadsFileAndRejectsMissingFile) {
  const auto dir = fresh_dir("parse");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "c.yaml") << "monte_carlo_runs: 4\n";
  }
  EXPECT_EQ(parse_config(dir / "c.yaml").monte_carlo_runs, 4);
  EXPECT_THROW(parse_config(dir / "missing.yaml"), Error);
}

TEST(Results, EmptySweepGivesHeaderOnly) {
  const SweepResult empty;
  EXPECT_EQ(results_csv(empty), std::string(kResultsCsvHeader) + "\n");
  const auto doc = results_json(empty, desk_scale_experiment());
  ASSERT_TRUE(doc.at("rows").is_array());
  EXPECT_TRUE(doc.at("rows").empty());
}

TEST(Results, OneRowPerResult) {
  auto r = two_rows();
  r.rows.resize(1);
  const auto lines = lines_of(results_csv(r));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], kResultsCsvHeader);
  const auto cells = split(lines[1]);
  ASSERT_EQ(cells.size(), 7u);
  EXPECT_EQ(cells[0], "gevd_r8");
  EXPECT_EQ(cells[1], "T");
  EXPECT_EQ(cells[2], "300");
  EXPECT_EQ(cells[5], "2");
  EXPECT_EQ(cells[6], "0");
}

TEST(Results, CsvAndJsonCarryTheSameValues) {
  const auto r = two_rows();
  const auto lines = lines_of(results_csv(r));
  const auto doc = results_json(r, desk_scale_experiment());
  ASSERT_EQ(doc.at("rows").size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto cells = split(lines[i + 1]);
    const auto& row = doc.at("rows")[i];
    EXPECT_EQ(std::stod(cells[3]), row.at("nmse").get<double>());
    EXPECT_EQ(std::stod(cells[4]), row.at("nmse_db").get<double>());
    EXPECT_EQ(std::stoi(cells[6]), row.at("fallbacks").get<int>());
    EXPECT_EQ(cells[0], row.at("estimator").get<std::string>());
  }
}

TEST(Results, JsonRoundTrip) {
  const auto r = two_rows();
  const auto text = results_json(r, desk_scale_experiment()).dump(2);
  const auto back = results_from_json(nlohmann::json::parse(text));
  ASSERT_EQ(back.rows.size(), r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].estimator, r.rows[i].estimator);
    EXPECT_EQ(back.rows[i].sweep_variable, r.rows[i].sweep_variable);
    EXPECT_EQ(back.rows[i].sweep_value, r.rows[i].sweep_value);
    EXPECT_NEAR(back.rows[i].nmse, r.rows[i].nmse, 1e-12);
    EXPECT_NEAR(back.rows[i].nmse_db, r.rows[i].nmse_db, 1e-12);
    EXPECT_EQ(back.rows[i].runs, r.rows[i].runs);
    EXPECT_EQ(back.rows[i].fallbacks, r.rows[i].fallbacks);
    ASSERT_EQ(back.rows[i].per_run_nmse.size(), r.rows[i].per_run_nmse.size());
    for (std::size_t k = 0; k < r.rows[i].per_run_nmse.size(); ++k)
      EXPECT_NEAR(back.rows[i].per_run_nmse[k], r.rows[i].per_run_nmse[k], 1e-12);
  }
}

TEST(Results, EmittedJsonReproducesConfig) {
  const std::vector<std::string> overrides = {"system.antennas=20", "seed=12345", "estimators=[subt, \"gevd_impr:7\"]"};
  const auto config = parse_config_text("{}", overrides);
  const auto dir = fresh_dir("emit");
  emit_results(two_rows(), config, dir);
  for (const char* f : {"results.csv", "results.json", "summary.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto again = parse_config(dir / "results.json");
  EXPECT_EQ(config_to_json(again), config_to_json(config));

  std::ifstream summary(dir / "summary.txt");
  const std::string text((std::istreambuf_iterator<char>(summary)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("gevd_impr_r4"), std::string::npos);
  EXPECT_NE(text.find("fallbacks 17"), std::string::npos);
}

TEST(Results, UnwritableDirectoryIsIoError) {
  const auto dir = fresh_dir("blocked");
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "file") << "x"; }
  EXPECT_THROW(emit_results(two_rows(), desk_scale_experiment(), dir / "file" / "sub"), IoError);
}

TEST(Validate, DeskProfileIsOk) {
  const auto report = validate(desk_scale_experiment());
  EXPECT_TRUE(report.ok);
  EXPECT_EQ(report.text.rfind("OK", 0), 0u);
  EXPECT_GT(report.runtime_seconds, 0.0);
}

TEST(Validate, ThreeCellsIsUnsupportedLayout) {
  auto c = desk_scale_experiment();
  c.system.num_cells = 3;
  const auto report = validate(c);
  EXPECT_FALSE(report.ok);
  EXPECT_EQ(report.text.rfind("INVALID", 0), 0u);
  bool layout = false;
  for (const auto& issue : report.issues) layout = layout || issue.rfind("UnsupportedLayout", 0) == 0;
  EXPECT_TRUE(layout);
}

TEST(Validate, PaperScaleMemoryEstimate) {
  const auto report = validate(paper_scale_experiment());
  EXPECT_TRUE(report.ok);
  EXPECT_EQ(report.covariance_matrices, 70u);
  EXPECT_DOUBLE_EQ(report.memory_bytes, 70.0 * 100 * 100 * 16 * 2);
  EXPECT_NE(report.text.find("70 covariance matrices of 100x100"), std::string::npos) << report.text;
}

TEST(Validate, BadTauIsReportedNotThrown) {
  auto c = desk_scale_experiment();
  c.system.tau_p = 0;
  const auto report = validate(c);
  EXPECT_FALSE(report.ok);
  ASSERT_FALSE(report.issues.empty());
  EXPECT_NE(report.issues[0].find("tau_p >= 1"), std::string::npos);
}

TEST(DescribeEstimators, ListsEveryKind) {
  const auto text = describe_estimators();
  for (const char* k : {"ls_fixed", "mmse_fixed", "mmse_random", "subt", "gevd:", "gevd_impr:"})
    EXPECT_NE(text.find(k), std::string::npos) << k;
}
