#include "gevd_mimo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>

#include "gevd_mimo/airlink.hpp"
#include "gevd_mimo/channel.hpp"
#include "gevd_mimo/covest.hpp"
#include "gevd_mimo/rng.hpp"

namespace gevd_mimo {

std::string to_string(SweepVariable v) {
  return v == SweepVariable::kBlocks ? "T" : "tau_p";
}

std::string EstimatorSpec::label() const {
  std::string s(to_string(kind));
  if (uses_rank()) s += "_r" + std::to_string(rank);
  return s;
}

EstimatorSpec parse_estimator_spec(const std::string& text) {
  static const std::map<std::string, EstimatorKind, std::less<>> kKinds = {
      {"ls_fixed", EstimatorKind::kLsFixed},     {"mmse_fixed", EstimatorKind::kMmseFixed},
      {"mmse_random", EstimatorKind::kMmseRandom}, {"subt", EstimatorKind::kSubt},
      {"gevd", EstimatorKind::kGevd},            {"gevd_impr", EstimatorKind::kGevdImproved},
  };
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const auto it = kKinds.find(name);
  if (it == kKinds.end()) throw ConfigInvalid("unknown estimator '" + name + "'");
  EstimatorSpec spec{it->second, 0};
  if (spec.uses_rank()) {
    if (colon == std::string::npos) {
      throw ConfigInvalid("estimator '" + name + "' needs a rank, e.g. '" + name + ":8'");
    }
    const std::string rank = text.substr(colon + 1);
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(rank, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rank.size()) {
      throw ConfigInvalid("estimator rank '" + rank + "' is not an integer");
    }
    spec.rank = value;
  } else if (colon != std::string::npos) {
    throw ConfigInvalid("estimator '" + name + "' takes no rank");
  }
  return spec;
}

std::string format_estimator_spec(const EstimatorSpec& spec) {
  std::string s(to_string(spec.kind));
  if (spec.uses_rank()) s += ":" + std::to_string(spec.rank);
  return s;
}

ExperimentConfig desk_scale_experiment() {
  ExperimentConfig c;
  c.estimators = {
      {EstimatorKind::kLsFixed, 0},      {EstimatorKind::kMmseFixed, 0},
      {EstimatorKind::kMmseRandom, 0},   {EstimatorKind::kSubt, 0},
      {EstimatorKind::kGevd, 8},         {EstimatorKind::kGevd, 16},
      {EstimatorKind::kGevdImproved, 8}, {EstimatorKind::kGevdImproved, 16},
  };
  c.sweep = {SweepVariable::kBlocks, {75, 150, 300, 600, 1200}};
  c.monte_carlo_runs = 10;
  return c;
}

ExperimentConfig paper_scale_experiment() {
  ExperimentConfig c = desk_scale_experiment();
  c.system.antennas = 100;
  c.system.ues_per_cell = 10;
  c.estimators = {
      {EstimatorKind::kLsFixed, 0},       {EstimatorKind::kMmseFixed, 0},
      {EstimatorKind::kMmseRandom, 0},    {EstimatorKind::kSubt, 0},
      {EstimatorKind::kGevd, 30},         {EstimatorKind::kGevd, 60},
      {EstimatorKind::kGevdImproved, 30}, {EstimatorKind::kGevdImproved, 60},
  };
  c.monte_carlo_runs = 20;
  return c;
}

namespace {

void require(bool ok, const std::string& invariant) {
  if (!ok) throw ConfigInvalid(invariant);
}

bool needs_estimation(const EstimatorSpec& e) {
  return e.kind == EstimatorKind::kSubt || e.kind == EstimatorKind::kGevd ||
         e.kind == EstimatorKind::kGevdImproved;
}

bool needs_fixed_pilots(const EstimatorSpec& e) {
  return e.kind == EstimatorKind::kLsFixed || e.kind == EstimatorKind::kMmseFixed;
}

}  // namespace

void validate_experiment(const ExperimentConfig& config) {
  const SystemConfig& s = config.system;
  require(s.num_cells == 1 || s.num_cells == 7, "num_cells in {1, 7} (UnsupportedLayout)");
  require(s.ues_per_cell >= 1, "ues_per_cell >= 1");
  require(s.antennas >= 1, "antennas >= 1");
  require(s.tau_p >= 1, "tau_p >= 1");
  require(s.tau_u >= 1, "tau_u >= 1");
  require(s.coherence_blocks >= 1, "coherence_blocks >= 1");
  require(s.evaluation_blocks >= 1, "evaluation_blocks >= 1");
  require(s.ue_power > 0.0, "ue_power > 0");
  require(s.noise_power > 0.0, "noise_power > 0");
  require(s.cell_radius > 0.0, "cell_radius > 0");
  require(s.ue_ring_radius > 0.0, "ue_ring_radius > 0");
  require(s.ue_ring_radius < s.cell_radius * std::sqrt(3.0) / 2.0,
          "ue_ring_radius < cell inradius (sqrt(3)/2 * cell_radius)");
  require(s.pathloss_exponent > 0.0, "pathloss_exponent > 0");
  require(s.angular_half_spread_deg >= 0.0 && s.angular_half_spread_deg < 90.0,
          "0 <= angular_half_spread_deg < 90");
  require(s.jammer_power >= 0.0, "jammer_power >= 0");
  require(s.loading_factor >= 0.0, "loading_factor >= 0");

  require(config.monte_carlo_runs >= 1, "monte_carlo_runs >= 1");
  require(!config.sweep.values.empty(), "sweep.values not empty");
  for (int v : config.sweep.values) require(v >= 1, "sweep values >= 1");
  require(!config.estimators.empty(), "estimators not empty");

  bool estimating = false;
  for (const auto& e : config.estimators) {
    if (e.uses_rank()) require(e.rank >= 1 && e.rank <= s.antennas, "1 <= estimator rank <= antennas");
    estimating = estimating || needs_estimation(e);
  }
  if (estimating) {
    for (int v : config.sweep.values) {
      const SystemConfig point = apply_sweep_value(s, config.sweep.variable, v);
      require(point.tau_p >= 2, "tau_p >= 2 for covariance-estimating estimators");
    }
  }
}

SystemConfig apply_sweep_value(SystemConfig system, SweepVariable variable, int value) {
  if (variable == SweepVariable::kBlocks) {
    system.coherence_blocks = value;
  } else {
    system.tau_p = value;
  }
  return system;
}

double nmse(const CVector& h, const CVector& h_hat, const HermitianMatrix& channel_cov) {
  const double tr = channel_cov.trace();
  if (!(tr > 0.0)) throw ZeroTraceCovariance("nmse: covariance trace must be positive");
  return (h - h_hat).squaredNorm() / tr;
}

std::uint64_t run_seed(std::uint64_t master_seed, int run) {
  return derive_seed(master_seed, StreamTag::kRun, static_cast<std::uint64_t>(run));
}

namespace {

constexpr int kCenterBs = 0;

/// Everything a run needs to evaluate one estimator for every center-cell UE.
struct PreparedEstimator {
  EstimatorSpec spec;
  std::vector<MmseFilter> filters;             // per UE, block-independent kinds
  const std::vector<LowRankCovEstimate>* lowrank = nullptr;  // improved kind
  double nmse_sum = 0.0;
  int fallbacks = 0;
};

std::optional<Jammer> jammer_for(const SystemConfig& s) {
  if (s.jammer_power <= 0.0) return std::nullopt;
  return Jammer{steering_vector(s.antennas, s.jammer_angle_deg * std::numbers::pi / 180.0),
                s.jammer_power};
}

/// Regularized filter construction used when a sample covariance is singular.
MmseFilter optimal_with_fallback(HermitianMatrix pilot_cov, const HermitianMatrix& channel_cov,
                                 double power, double loading_factor, int& fallbacks) {
  try {
    return mmse_optimal_filter(pilot_cov, channel_cov, power);
  } catch (const NotPositiveDefinite&) {
    ++fallbacks;
    pilot_cov.add_identity(loading_factor * std::abs(pilot_cov.trace()) /
                           static_cast<double>(pilot_cov.dim()));
    return mmse_optimal_filter(pilot_cov, channel_cov, power);
  }
}

}  // namespace

RunOutput run_single(const ExperimentConfig& config, int sweep_value, std::uint64_t seed,
                     const RunOptions& options) {
  const SystemConfig sys = apply_sweep_value(config.system, config.sweep.variable, sweep_value);
  const int n = sys.antennas;
  const int num_cells = sys.num_cells;
  const int num_ues = sys.ues_per_cell;
  const int tau_p = sys.tau_p;
  const int blocks = sys.coherence_blocks;
  const int eval_blocks = sys.evaluation_blocks;
  const std::vector<double> powers = sys.powers();

  const NetworkGeometry geometry = build_geometry(sys, derive_seed(seed, StreamTag::kGeometry));
  const ChannelStatistics stats = ChannelStatistics::from_geometry(geometry, sys, {kCenterBs});
  const NoiseModel noise(make_noise_covariance(n, sys.noise_power, jammer_for(sys)));
  const PilotBook book = make_pilot_book(tau_p);

  const bool estimating = std::any_of(config.estimators.begin(), config.estimators.end(), needs_estimation);
  const bool fixed = std::any_of(config.estimators.begin(), config.estimators.end(), needs_fixed_pilots);

  RunOutput out;
  out.estimation_blocks = {0, estimating && !options.exact_statistics ? blocks : 0};
  out.evaluation_blocks = {blocks, eval_blocks};

  // Sample covariances from the estimation window.
  std::vector<PilotCovEstimate> pilot_cov(static_cast<std::size_t>(num_ues));
  HermitianMatrix all_cov;
  if (estimating) {
    if (options.exact_statistics) {
      for (int k = 0; k < num_ues; ++k) {
        auto& pc = pilot_cov[static_cast<std::size_t>(k)];
        pc.matrix = analytic_pilot_cov(stats, kCenterBs, k, powers, noise.covariance(), tau_p);
        pc.bs = kCenterBs;
        pc.ue = k;
      }
      all_cov = analytic_all_cov(stats, kCenterBs, powers, noise.covariance());
    } else {
      std::vector<PilotCovAccumulator> pilot_acc(static_cast<std::size_t>(num_ues),
                                                 PilotCovAccumulator(n, tau_p));
      AllCovAccumulator all_acc(n);
      for (int t = 0; t < blocks; ++t) {
        const std::uint64_t block_seed = derive_seed(seed, StreamTag::kEstimationBlock, static_cast<std::uint64_t>(t));
        const auto channels = sample_channels(stats, t, block_seed);
        const auto alloc = allocate_pilots(1, num_cells, num_ues, tau_p, AllocationMode::kRandom, block_seed);
        const auto pilots = alloc.block(0);
        const auto rx = simulate_block(t, channels, pilots, book, powers, noise, sys.tau_u, block_seed);
        const CMatrix& y = rx.pilot_at(kCenterBs);
        all_acc.add(y, rx.data_at(kCenterBs));
        for (int k = 0; k < num_ues; ++k) {
          pilot_acc[static_cast<std::size_t>(k)].add(despread(y, book, pilots[static_cast<std::size_t>(k)]));
        }
      }
      for (int k = 0; k < num_ues; ++k) {
        pilot_cov[static_cast<std::size_t>(k)] = pilot_acc[static_cast<std::size_t>(k)].finish(0.0, kCenterBs, k);
      }
      all_cov = all_acc.finish(kCenterBs).matrix;
    }
  }

  // Low-rank estimates shared between the approximate and improved filters.
  std::map<int, std::vector<LowRankCovEstimate>> lowrank_by_rank;
  std::map<int, int> lowrank_loading;
  auto lowrank_for = [&](int rank) -> const std::vector<LowRankCovEstimate>& {
    auto it = lowrank_by_rank.find(rank);
    if (it != lowrank_by_rank.end()) return it->second;
    std::vector<LowRankCovEstimate> v;
    int loaded = 0;
    for (int k = 0; k < num_ues; ++k) {
      v.push_back(gevd_lowrank_estimator(pilot_cov[static_cast<std::size_t>(k)].matrix, all_cov, tau_p,
                                         powers[static_cast<std::size_t>(k)], rank, sys.loading_factor));
      if (v.back().loading_applied) ++loaded;
    }
    lowrank_loading[rank] = loaded;
    return lowrank_by_rank.emplace(rank, std::move(v)).first->second;
  };

  std::vector<HermitianMatrix> true_pilot_cov;
  auto ensure_true_pilot_cov = [&] {
    if (!true_pilot_cov.empty()) return;
    for (int k = 0; k < num_ues; ++k) {
      true_pilot_cov.push_back(analytic_pilot_cov(stats, kCenterBs, k, powers, noise.covariance(), tau_p));
    }
  };

  const PilotAllocation fixed_alloc =
      allocate_pilots(1, num_cells, num_ues, tau_p, AllocationMode::kFixedCyclic, 0);
  const auto fixed_pilots = fixed_alloc.block(0);

  std::vector<PreparedEstimator> prepared;
  for (const auto& spec : config.estimators) {
    PreparedEstimator pe;
    pe.spec = spec;
    switch (spec.kind) {
      case EstimatorKind::kLsFixed:
        break;
      case EstimatorKind::kMmseFixed:
        for (int k = 0; k < num_ues; ++k) {
          std::vector<Interferer> sharing;
          const int b = fixed_pilots[static_cast<std::size_t>(kCenterBs * num_ues + k)];
          for (int l = 0; l < num_cells; ++l) {
            for (int i = 0; i < num_ues; ++i) {
              const auto u = static_cast<std::size_t>(l * num_ues + i);
              if ((l == kCenterBs && i == k) || fixed_pilots[u] != b) continue;
              sharing.push_back({&stats.covariance(kCenterBs, l, i), powers[u]});
            }
          }
          pe.filters.push_back(mmse_fixed_filter(stats.covariance(kCenterBs, kCenterBs, k),
                                                 powers[static_cast<std::size_t>(k)], sharing,
                                                 noise.covariance(), tau_p));
        }
        break;
      case EstimatorKind::kMmseRandom:
        ensure_true_pilot_cov();
        for (int k = 0; k < num_ues; ++k) {
          pe.filters.push_back(mmse_optimal_filter(true_pilot_cov[static_cast<std::size_t>(k)],
                                                   stats.covariance(kCenterBs, kCenterBs, k),
                                                   powers[static_cast<std::size_t>(k)]));
        }
        break;
      case EstimatorKind::kSubt:
        for (int k = 0; k < num_ues; ++k) {
          const double p = powers[static_cast<std::size_t>(k)];
          const auto& pc = pilot_cov[static_cast<std::size_t>(k)].matrix;
          const HermitianMatrix r = subtraction_estimator(pc, all_cov, tau_p, p);
          pe.filters.push_back(optimal_with_fallback(pc, r, p, sys.loading_factor, pe.fallbacks));
        }
        break;
      case EstimatorKind::kGevd: {
        const auto& lr = lowrank_for(spec.rank);
        pe.fallbacks += lowrank_loading[spec.rank];
        for (int k = 0; k < num_ues; ++k) {
          pe.filters.push_back(approx_mmse_filter(lr[static_cast<std::size_t>(k)],
                                                  powers[static_cast<std::size_t>(k)]));
        }
        break;
      }
      case EstimatorKind::kGevdImproved: {
        const auto& lr = lowrank_for(spec.rank);
        pe.fallbacks += lowrank_loading[spec.rank];
        pe.lowrank = &lr;
        // Approximate filters serve as the per-block fallback.
        for (int k = 0; k < num_ues; ++k) {
          pe.filters.push_back(approx_mmse_filter(lr[static_cast<std::size_t>(k)],
                                                  powers[static_cast<std::size_t>(k)]));
        }
        break;
      }
    }
    prepared.push_back(std::move(pe));
  }

  // Held-out evaluation.
  const std::span<const double> cell_powers(powers.data() + kCenterBs * num_ues, static_cast<std::size_t>(num_ues));
  for (int e = 0; e < eval_blocks; ++e) {
    const int t = blocks + e;
    const std::uint64_t block_seed = derive_seed(seed, StreamTag::kEvaluationBlock, static_cast<std::uint64_t>(e));
    const auto channels = sample_channels(stats, t, block_seed);
    const auto alloc = allocate_pilots(1, num_cells, num_ues, tau_p, AllocationMode::kRandom, block_seed);
    const auto pilots = alloc.block(0);
    const auto rx = simulate_block(t, channels, pilots, book, powers, noise, sys.tau_u, block_seed);
    std::optional<BlockSignals> rx_fixed;
    if (fixed) {
      rx_fixed = simulate_block(t, channels, fixed_pilots, book, powers, noise, sys.tau_u, block_seed);
    }
    const std::span<const int> cell_pilots = pilots.subspan(static_cast<std::size_t>(kCenterBs * num_ues),
                                                            static_cast<std::size_t>(num_ues));

    for (int k = 0; k < num_ues; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const CVector h = channels.h(kCenterBs, kCenterBs, k);
      const HermitianMatrix& r_true = stats.covariance(kCenterBs, kCenterBs, k);
      const CVector y = despread(rx.pilot_at(kCenterBs), book, pilots[uk]);
      CVector y_fixed;
      if (rx_fixed) y_fixed = despread(rx_fixed->pilot_at(kCenterBs), book, fixed_pilots[uk]);

      for (auto& pe : prepared) {
        CVector h_hat;
        switch (pe.spec.kind) {
          case EstimatorKind::kLsFixed:
            h_hat = ls_estimate(y_fixed, powers[uk], tau_p).h_hat;
            break;
          case EstimatorKind::kMmseFixed:
            h_hat = pe.filters[uk].apply(y_fixed);
            break;
          case EstimatorKind::kMmseRandom:
          case EstimatorKind::kSubt:
          case EstimatorKind::kGevd:
            h_hat = pe.filters[uk].apply(y);
            break;
          case EstimatorKind::kGevdImproved:
            try {
              h_hat = improved_mmse_filter(pilot_cov[uk], *pe.lowrank, cell_pilots, cell_powers, tau_p, k,
                                           sys.loading_factor)
                          .apply(y);
            } catch (const NotPositiveDefinite&) {
              ++pe.fallbacks;
              h_hat = pe.filters[uk].apply(y);
            }
            break;
        }
        pe.nmse_sum += nmse(h, h_hat, r_true);
      }
    }
  }

  const double samples = static_cast<double>(eval_blocks) * num_ues;
  for (const auto& pe : prepared) {
    out.contributions.push_back({pe.spec, pe.nmse_sum / samples, pe.fallbacks});
  }
  return out;
}

double pairwise_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  auto sum = [](auto&& self, const double* v, std::size_t count) -> double {
    if (count <= 2) return count == 1 ? v[0] : v[0] + v[1];
    const std::size_t half = count / 2;
    return self(self, v, half) + self(self, v + half, count - half);
  };
  return sum(sum, values.data(), values.size()) / static_cast<double>(values.size());
}

SweepResult run_sweep(const ExperimentConfig& config, int threads, const RunOptions& options) {
  validate_experiment(config);
  const auto num_values = config.sweep.values.size();
  const auto runs = static_cast<std::size_t>(config.monte_carlo_runs);
  const std::size_t jobs = num_values * runs;

  std::vector<RunOutput> outputs(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t job = next.fetch_add(1); job < jobs; job = next.fetch_add(1)) {
      const std::size_t v = job / runs;
      const int r = static_cast<int>(job % runs);
      try {
        outputs[job] = run_single(config, config.sweep.values[v], run_seed(config.master_seed, r), options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(jobs);
      }
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(jobs, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  for (std::size_t v = 0; v < num_values; ++v) {
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      NmseResult row;
      row.estimator = config.estimators[e];
      row.sweep_variable = config.sweep.variable;
      row.sweep_value = config.sweep.values[v];
      row.runs = config.monte_carlo_runs;
      for (std::size_t r = 0; r < runs; ++r) {
        const auto& c = outputs[v * runs + r].contributions[e];
        row.per_run_nmse.push_back(c.nmse);
        row.fallbacks += c.fallbacks;
      }
      row.nmse = pairwise_mean(row.per_run_nmse);
      row.nmse_db = 10.0 * std::log10(row.nmse);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace gevd_mimo
