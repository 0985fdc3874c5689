#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "gevd_mimo/covest.hpp"
#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

enum class FilterKind { kOptimal, kApproximate, kImproved, kMmseFixed };

/// Linear channel estimator h_hat = W^H * y_pilot for one UE.
struct MmseFilter {
  CMatrix w;
  int bs = 0;
  int ue = 0;
  FilterKind kind = FilterKind::kOptimal;
  bool block_dependent = false;

  CVector apply(const CVector& y_pilot) const { return w.adjoint() * y_pilot; }
};

enum class EstimatorKind {
  kLsFixed,       // least squares, fixed cyclic pilots
  kMmseFixed,     // MMSE with true covariances, fixed cyclic pilots
  kMmseRandom,    // MMSE with true covariances, random pilots
  kSubt,          // MMSE form with the subtraction covariance estimate
  kGevd,          // low-rank approximate MMSE
  kGevdImproved,  // low-rank approximate MMSE using intra-cell pilot choices
};

std::string_view to_string(EstimatorKind kind);

struct EstimatorOutput {
  CVector h_hat;
  EstimatorKind kind = EstimatorKind::kGevd;
  int rank_effective = -1;  // -1 when not applicable
};

/// W = sqrt(p) * R_pilot^{-1} * R.
MmseFilter mmse_optimal_filter(const HermitianMatrix& pilot_cov, const HermitianMatrix& channel_cov,
                               double power);

/// W = (1/sqrt(p)) * X_R * diag(upsilon) * Q_R^H with
/// upsilon_r = (sigma_r - 1) / ((tau_p - 1) * sigma_r).
MmseFilter approx_mmse_filter(const LowRankCovEstimate& lowrank, double power);

/// Sum form: (1/sqrt(p)) * sum_r q_r * upsilon_r * (x_r^H y).
EstimatorOutput approx_mmse_estimate(const LowRankCovEstimate& lowrank, double power,
                                     const CVector& y_pilot);

/// Per-block filter exploiting the known intra-cell pilot choices.
///
/// intracell holds the low-rank estimates of all K UEs of the cell (index k is
/// the desired UE); block_pilots and powers hold the cell's K pilot indices and
/// powers for this block. Builds
///   M_t = pilot_cov + sum_{i != k} c_i * p_i * R_hat_i,
/// with c_i = tau_p - 1 when UE i shares k's pilot and -1 otherwise, and
/// returns W = sqrt(p_k) * M_t^{-1} * R_hat_k. If M_t is not positive definite
/// it is loaded once with loading_factor * trace/N; a second failure throws
/// NotPositiveDefinite.
MmseFilter improved_mmse_filter(const PilotCovEstimate& pilot_cov,
                                std::span<const LowRankCovEstimate> intracell,
                                std::span<const int> block_pilots, std::span<const double> powers,
                                int tau_p, int ue, double loading_factor = 1e-3);

/// h_hat = y / (sqrt(p) * tau_p).
EstimatorOutput ls_estimate(const CVector& y_pilot, double power, int tau_p);

/// A UE whose channel statistics enter another UE's estimator as interference.
struct Interferer {
  const HermitianMatrix* covariance;
  double power;
};

/// LMMSE filter of the despread signal under a fixed allocation:
/// W = sqrt(p) * (p tau_p R + sum_shared p_li tau_p R_li + R_nn)^{-1} * R.
MmseFilter mmse_fixed_filter(const HermitianMatrix& channel_cov, double power,
                             std::span<const Interferer> sharing_pilot,
                             const HermitianMatrix& noise_cov, int tau_p);

}  // namespace gevd_mimo
