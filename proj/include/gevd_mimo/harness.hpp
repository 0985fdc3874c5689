#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gevd_mimo/config.hpp"
#include "gevd_mimo/estimators.hpp"
#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

class ZeroTraceCovariance : public Error {
 public:
  using Error::Error;
};

/// An experiment configuration violates one of its invariants. The message
/// names the violated invariant.
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

enum class SweepVariable { kBlocks, kTauP };

std::string to_string(SweepVariable v);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kGevd;
  int rank = 0;  // used by kGevd and kGevdImproved

  bool uses_rank() const {
    return kind == EstimatorKind::kGevd || kind == EstimatorKind::kGevdImproved;
  }
  /// Stable identifier, e.g. "gevd_r8", "subt".
  std::string label() const;

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

/// Parses "gevd:8", "gevd_impr:16", "subt", ...; throws ConfigInvalid.
EstimatorSpec parse_estimator_spec(const std::string& text);
/// Inverse of parse_estimator_spec.
std::string format_estimator_spec(const EstimatorSpec& spec);

struct SweepSpec {
  SweepVariable variable = SweepVariable::kBlocks;
  std::vector<int> values;
};

struct ExperimentConfig {
  SystemConfig system;
  std::vector<EstimatorSpec> estimators;
  SweepSpec sweep;
  int monte_carlo_runs = 10;
  std::uint64_t master_seed = 1;
};

/// Desk-scale profile: N = 32, L = 7, K = 5, tau_p = 10, tau_u = 40, T-sweep up
/// to 1200 blocks, 10 runs.
ExperimentConfig desk_scale_experiment();
/// N = 100, K = 10, 20 runs, ranks 30 and 60.
ExperimentConfig paper_scale_experiment();

/// Throws ConfigInvalid naming the first violated invariant.
void validate_experiment(const ExperimentConfig& config);

SystemConfig apply_sweep_value(SystemConfig system, SweepVariable variable, int value);

/// ||h - h_hat||^2 / tr(R).
double nmse(const CVector& h, const CVector& h_hat, const HermitianMatrix& channel_cov);

struct NmseResult {
  EstimatorSpec estimator;
  SweepVariable sweep_variable = SweepVariable::kBlocks;
  int sweep_value = 0;
  double nmse = 0.0;  // linear
  double nmse_db = 0.0;
  int runs = 0;
  int fallbacks = 0;
  std::vector<double> per_run_nmse;
};

struct RunContribution {
  EstimatorSpec estimator;
  double nmse = 0.0;  // mean over evaluation blocks and center-cell UEs
  int fallbacks = 0;
};

struct BlockRange {
  int first = 0;
  int count = 0;
  bool contains(int t) const { return t >= first && t < first + count; }
};

struct RunOutput {
  std::vector<RunContribution> contributions;  // same order as config.estimators
  BlockRange estimation_blocks;
  BlockRange evaluation_blocks;
};

struct RunOptions {
  /// Replace the sample covariances by their analytic expectations.
  bool exact_statistics = false;
};

/// Seed of Monte-Carlo run r; independent of the sweep value so sweeps share
/// block streams across sweep points.
std::uint64_t run_seed(std::uint64_t master_seed, int run);

/// One Monte-Carlo run at one sweep point, evaluated for the center cell.
///
/// Simulates T estimation blocks (random pilots) that feed the sample
/// covariances, builds every requested estimator, then measures NMSE on
/// E held-out blocks with fresh channels. Fixed-allocation estimators see the
/// same held-out channels and noise with cyclic pilots.
RunOutput run_single(const ExperimentConfig& config, int sweep_value, std::uint64_t seed,
                     const RunOptions& options = {});

struct SweepResult {
  std::vector<NmseResult> rows;  // sweep value major, estimator minor
};

/// All sweep values x runs, executed on `threads` workers (0 = hardware
/// concurrency). Results do not depend on the thread count.
SweepResult run_sweep(const ExperimentConfig& config, int threads = 0,
                      const RunOptions& options = {});

/// Mean by pairwise summation, independent of scheduling.
double pairwise_mean(const std::vector<double>& values);

}  // namespace gevd_mimo
