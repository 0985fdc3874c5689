#pragma once

#include <vector>

namespace gevd_mimo {

/// Scalar model parameters of the simulated network.
///
/// Defaults are the desk-scale profile. The geometry values (cell radius,
/// ring radius, pathloss exponent) and the noise level are not pinned down by
/// the underlying setup and are configurable.
struct SystemConfig {
  int num_cells = 7;     // L
  int ues_per_cell = 5;  // K
  int antennas = 32;     // N
  int tau_p = 10;        // pilot samples per coherence block
  int tau_u = 40;        // data samples per coherence block
  int coherence_blocks = 1200;  // T, blocks used for covariance estimation
  int evaluation_blocks = 200;  // held-out blocks used to measure NMSE

  double ue_power = 1.0;     // p_lk, same for pilot and data phase
  double noise_power = 1.0;  // sigma^2, relative to the unit serving gain

  double cell_radius = 250.0;     // meters
  double ue_ring_radius = 140.0;  // meters
  double pathloss_exponent = 3.76;
  double angular_half_spread_deg = 10.0;

  double jammer_power = 0.0;  // 0 disables the jammer
  double jammer_angle_deg = 30.0;

  double loading_factor = 1e-3;

  int tau_c() const { return tau_p + tau_u; }
  int total_ues() const { return num_cells * ues_per_cell; }
  /// Per-UE transmit powers indexed [l * K + k].
  std::vector<double> powers() const {
    return std::vector<double>(static_cast<std::size_t>(total_ues()), ue_power);
  }
};

}  // namespace gevd_mimo
