#include "gevd_mimo/estimators.hpp"

#include <cmath>

namespace gevd_mimo {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kLsFixed: return "ls_fixed";
    case EstimatorKind::kMmseFixed: return "mmse_fixed";
    case EstimatorKind::kMmseRandom: return "mmse_random";
    case EstimatorKind::kSubt: return "subt";
    case EstimatorKind::kGevd: return "gevd";
    case EstimatorKind::kGevdImproved: return "gevd_impr";
  }
  return "unknown";
}

MmseFilter mmse_optimal_filter(const HermitianMatrix& pilot_cov, const HermitianMatrix& channel_cov,
                               double power) {
  MmseFilter f;
  f.kind = FilterKind::kOptimal;
  f.w = std::sqrt(power) * solve_hermitian(pilot_cov, channel_cov.matrix());
  return f;
}

namespace {

RVector upsilon(const LowRankCovEstimate& lr) {
  return (lr.sigma.array() - 1.0) / (static_cast<double>(lr.tau_p - 1) * lr.sigma.array());
}

}  // namespace

MmseFilter approx_mmse_filter(const LowRankCovEstimate& lowrank, double power) {
  const auto n = lowrank.scaled_matrix.dim();
  MmseFilter f;
  f.kind = FilterKind::kApproximate;
  if (lowrank.rank_effective == 0) {
    f.w = CMatrix::Zero(n, n);
    return f;
  }
  f.w = (1.0 / std::sqrt(power)) * lowrank.x * upsilon(lowrank).cast<Complex>().asDiagonal() *
        lowrank.q.adjoint();
  return f;
}

EstimatorOutput approx_mmse_estimate(const LowRankCovEstimate& lowrank, double power,
                                     const CVector& y_pilot) {
  EstimatorOutput out;
  out.kind = EstimatorKind::kGevd;
  out.rank_effective = lowrank.rank_effective;
  out.h_hat = CVector::Zero(y_pilot.size());
  const RVector ups = upsilon(lowrank);
  for (int r = 0; r < lowrank.rank_effective; ++r) {
    const Complex z = ups(r) * lowrank.x.col(r).dot(y_pilot);  // dot conjugates the first argument
    out.h_hat += z * lowrank.q.col(r);
  }
  out.h_hat /= std::sqrt(power);
  return out;
}

MmseFilter improved_mmse_filter(const PilotCovEstimate& pilot_cov,
                                std::span<const LowRankCovEstimate> intracell,
                                std::span<const int> block_pilots, std::span<const double> powers,
                                int tau_p, int ue, double loading_factor) {
  const auto num_ues = intracell.size();
  if (block_pilots.size() != num_ues || powers.size() != num_ues) {
    throw Error("improved_mmse_filter: intra-cell vectors differ in length");
  }
  const auto k = static_cast<std::size_t>(ue);
  HermitianMatrix m = pilot_cov.matrix;
  for (std::size_t i = 0; i < num_ues; ++i) {
    if (i == k) continue;
    // scaled_matrix already carries p_ji.
    const double c = block_pilots[i] == block_pilots[k] ? tau_p - 1.0 : -1.0;
    m += intracell[i].scaled_matrix * c;
  }
  const CMatrix r_hat = intracell[k].scaled_matrix.matrix() / powers[k];

  MmseFilter f;
  f.bs = pilot_cov.bs;
  f.ue = ue;
  f.kind = FilterKind::kImproved;
  f.block_dependent = true;
  try {
    f.w = std::sqrt(powers[k]) * solve_hermitian(m, r_hat);
  } catch (const NotPositiveDefinite&) {
    const double load = loading_factor * std::abs(m.trace()) / static_cast<double>(m.dim());
    m.add_identity(load);
    f.w = std::sqrt(powers[k]) * solve_hermitian(m, r_hat);
  }
  return f;
}

EstimatorOutput ls_estimate(const CVector& y_pilot, double power, int tau_p) {
  EstimatorOutput out;
  out.kind = EstimatorKind::kLsFixed;
  out.h_hat = y_pilot / (std::sqrt(power) * tau_p);
  return out;
}

MmseFilter mmse_fixed_filter(const HermitianMatrix& channel_cov, double power,
                             std::span<const Interferer> sharing_pilot,
                             const HermitianMatrix& noise_cov, int tau_p) {
  HermitianMatrix m = channel_cov * (power * tau_p);
  for (const auto& other : sharing_pilot) m += *other.covariance * (other.power * tau_p);
  m += noise_cov;
  MmseFilter f;
  f.kind = FilterKind::kMmseFixed;
  f.w = std::sqrt(power) * solve_hermitian(m, channel_cov.matrix());
  return f;
}

}  // namespace gevd_mimo
