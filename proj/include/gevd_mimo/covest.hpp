#pragma once

#include <span>
#include <vector>

#include "gevd_mimo/airlink.hpp"
#include "gevd_mimo/channel.hpp"
#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

class DegeneratePilotCount : public Error {
 public:
  using Error::Error;
};

/// Sample estimate of the despread-signal covariance of UE (bs, ue),
/// (1/(T*tau_p)) * sum_t y_t y_t^H plus optional diagonal loading.
struct PilotCovEstimate {
  HermitianMatrix matrix;
  int bs = 0;
  int ue = 0;
  int blocks_used = 0;
  double loading = 0.0;  // absolute amount added to the diagonal
};

/// Sample covariance of all received samples of a BS, both phases.
struct AllCovEstimate {
  HermitianMatrix matrix;
  int bs = 0;
  int blocks_used = 0;
};

/// Rank-limited estimate p_jk * R_jjk built from the generalized eigenpairs of
/// {pilot_cov, all_cov} whose eigenvalue exceeds one.
struct LowRankCovEstimate {
  HermitianMatrix scaled_matrix;  // p_jk * R_hat = Q_R diag(lambda_R) Q_R^H
  int rank_requested = 0;
  int rank_effective = 0;
  int tau_p = 0;
  CMatrix q;       // N x rank_effective
  CMatrix x;       // N x rank_effective
  RVector sigma;   // generalized eigenvalues kept, all > 1
  RVector lambda;  // (sigma - 1) / (tau_p - 1)
  bool loading_applied = false;
};

/// Generalized eigenvalues within this distance of one count as not exceeding it.
inline constexpr double kSelectionTolerance = 1e-9;

/// Streaming form of estimate_pilot_cov.
class PilotCovAccumulator {
 public:
  PilotCovAccumulator(int antennas, int tau_p);
  void add(const CVector& despread);
  PilotCovEstimate finish(double loading_factor, int bs = 0, int ue = 0) const;
  int count() const { return count_; }

 private:
  CMatrix sum_;
  int tau_p_;
  int count_ = 0;
};

/// Streaming form of estimate_all_cov.
class AllCovAccumulator {
 public:
  explicit AllCovAccumulator(int antennas);
  void add(const CMatrix& pilot_rx, const CMatrix& data_rx);
  AllCovEstimate finish(int bs = 0) const;
  int blocks() const { return blocks_; }

 private:
  CMatrix sum_;
  long long samples_ = 0;
  int blocks_ = 0;
};

/// loading = loading_factor * trace/N, added to the diagonal.
PilotCovEstimate estimate_pilot_cov(std::span<const CVector> despread, int tau_p,
                                    double loading_factor, int bs = 0, int ue = 0);

/// Averages y*y^H over all tau_c samples of every block.
AllCovEstimate estimate_all_cov(std::span<const BlockSignals> blocks, int bs);

/// (pilot_cov - all_cov) / ((tau_p - 1) * p_jk). May be indefinite.
HermitianMatrix subtraction_estimator(const HermitianMatrix& pilot_cov,
                                      const HermitianMatrix& all_cov, int tau_p, double power);

/// Keeps the generalized eigenpairs of {pilot_cov, all_cov} with the `rank`
/// largest eigenvalues above one. When all_cov is not positive definite it is
/// loaded once with loading_factor * trace/N before the decomposition.
LowRankCovEstimate gevd_lowrank_estimator(const HermitianMatrix& pilot_cov,
                                          const HermitianMatrix& all_cov, int tau_p,
                                          double power, int rank,
                                          double loading_factor = 1e-3);

/// Expected despread covariance under random pilots:
/// p_jk tau_p R_jjk + sum_{(l,i) != (j,k)} p_li R_jli + R_nn.
HermitianMatrix analytic_pilot_cov(const ChannelStatistics& stats, int bs, int ue,
                                   std::span<const double> powers, const HermitianMatrix& noise_cov,
                                   int tau_p);

/// sum_{l,i} p_li R_jli + R_nn.
HermitianMatrix analytic_all_cov(const ChannelStatistics& stats, int bs,
                                 std::span<const double> powers, const HermitianMatrix& noise_cov);

}  // namespace gevd_mimo
