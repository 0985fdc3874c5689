#include "gevd_mimo/covest.hpp"

#include <algorithm>

namespace gevd_mimo {

PilotCovAccumulator::PilotCovAccumulator(int antennas, int tau_p)
    : sum_(CMatrix::Zero(antennas, antennas)), tau_p_(tau_p) {}

void PilotCovAccumulator::add(const CVector& despread) {
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(despread);
  ++count_;
}

PilotCovEstimate PilotCovAccumulator::finish(double loading_factor, int bs, int ue) const {
  const auto n = sum_.rows();
  PilotCovEstimate out;
  out.bs = bs;
  out.ue = ue;
  out.blocks_used = count_;
  if (count_ == 0) {
    out.matrix = HermitianMatrix(n);
    return out;
  }
  CMatrix full = sum_.selfadjointView<Eigen::Lower>();
  out.matrix = HermitianMatrix::from(full) * (1.0 / (static_cast<double>(count_) * tau_p_));
  if (loading_factor > 0.0 && n > 0) {
    out.loading = loading_factor * out.matrix.trace() / static_cast<double>(n);
    out.matrix.add_identity(out.loading);
  }
  return out;
}

AllCovAccumulator::AllCovAccumulator(int antennas) : sum_(CMatrix::Zero(antennas, antennas)) {}

void AllCovAccumulator::add(const CMatrix& pilot_rx, const CMatrix& data_rx) {
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(pilot_rx);
  sum_.selfadjointView<Eigen::Lower>().rankUpdate(data_rx);
  samples_ += pilot_rx.cols() + data_rx.cols();
  ++blocks_;
}

AllCovEstimate AllCovAccumulator::finish(int bs) const {
  AllCovEstimate out;
  out.bs = bs;
  out.blocks_used = blocks_;
  if (samples_ == 0) {
    out.matrix = HermitianMatrix(sum_.rows());
    return out;
  }
  CMatrix full = sum_.selfadjointView<Eigen::Lower>();
  out.matrix = HermitianMatrix::from(full) * (1.0 / static_cast<double>(samples_));
  return out;
}

PilotCovEstimate estimate_pilot_cov(std::span<const CVector> despread, int tau_p,
                                    double loading_factor, int bs, int ue) {
  if (despread.empty()) throw Error("estimate_pilot_cov: need at least one block");
  PilotCovAccumulator acc(static_cast<int>(despread.front().size()), tau_p);
  for (const auto& y : despread) acc.add(y);
  return acc.finish(loading_factor, bs, ue);
}

AllCovEstimate estimate_all_cov(std::span<const BlockSignals> blocks, int bs) {
  if (blocks.empty()) throw Error("estimate_all_cov: need at least one block");
  AllCovAccumulator acc(static_cast<int>(blocks.front().pilot_at(bs).rows()));
  for (const auto& b : blocks) acc.add(b.pilot_at(bs), b.data_at(bs));
  return acc.finish(bs);
}

HermitianMatrix subtraction_estimator(const HermitianMatrix& pilot_cov,
                                      const HermitianMatrix& all_cov, int tau_p, double power) {
  if (tau_p < 2) throw DegeneratePilotCount("subtraction_estimator: requires tau_p >= 2");
  return (pilot_cov - all_cov) * (1.0 / ((tau_p - 1) * power));
}

LowRankCovEstimate gevd_lowrank_estimator(const HermitianMatrix& pilot_cov,
                                          const HermitianMatrix& all_cov, int tau_p,
                                          double power, int rank, double loading_factor) {
  if (tau_p < 2) throw DegeneratePilotCount("gevd_lowrank_estimator: requires tau_p >= 2");
  const auto n = pilot_cov.dim();
  if (rank < 1 || rank > n) throw Error("gevd_lowrank_estimator: rank must lie in [1, N]");
  if (!(power > 0.0)) throw Error("gevd_lowrank_estimator: power must be positive");

  LowRankCovEstimate out;
  out.rank_requested = rank;
  out.tau_p = tau_p;

  GevdResult pencil;
  try {
    pencil = gevd(pilot_cov, all_cov);
  } catch (const NotPositiveDefinite&) {
    HermitianMatrix loaded = all_cov;
    loaded.add_identity(loading_factor * all_cov.trace() / static_cast<double>(n));
    pencil = gevd(pilot_cov, loaded);
    out.loading_applied = true;
  }

  int kept = 0;
  while (kept < rank && pencil.eigenvalues(kept) > 1.0 + kSelectionTolerance) ++kept;
  out.rank_effective = kept;
  out.sigma = pencil.eigenvalues.head(kept);
  out.lambda = (out.sigma.array() - 1.0) / static_cast<double>(tau_p - 1);
  out.q = pencil.q.leftCols(kept);
  out.x = pencil.x.leftCols(kept);
  out.scaled_matrix =
      HermitianMatrix::from(out.q * out.lambda.cast<Complex>().asDiagonal() * out.q.adjoint());
  return out;
}

HermitianMatrix analytic_pilot_cov(const ChannelStatistics& stats, int bs, int ue,
                                   std::span<const double> powers, const HermitianMatrix& noise_cov,
                                   int tau_p) {
  HermitianMatrix r = noise_cov;
  const int num_ues = stats.ues_per_cell();
  for (int l = 0; l < stats.num_cells(); ++l) {
    for (int i = 0; i < num_ues; ++i) {
      const double p = powers[static_cast<std::size_t>(l * num_ues + i)];
      const double weight = (l == bs && i == ue) ? p * tau_p : p;
      r += stats.covariance(bs, l, i) * weight;
    }
  }
  return r;
}

HermitianMatrix analytic_all_cov(const ChannelStatistics& stats, int bs,
                                 std::span<const double> powers, const HermitianMatrix& noise_cov) {
  HermitianMatrix r = noise_cov;
  const int num_ues = stats.ues_per_cell();
  for (int l = 0; l < stats.num_cells(); ++l) {
    for (int i = 0; i < num_ues; ++i) {
      r += stats.covariance(bs, l, i) * powers[static_cast<std::size_t>(l * num_ues + i)];
    }
  }
  return r;
}

}  // namespace gevd_mimo
