#pragma once

#include <cstdint>
#include <vector>

#include "gevd_mimo/config.hpp"
#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

class UnsupportedLayout : public Error {
 public:
  using Error::Error;
};

class InvalidSpread : public Error {
 public:
  using Error::Error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Multicell layout: a center hexagonal cell plus, for L = 7, the first ring
/// of six neighbors. UEs of each cell sit on a ring around their BS.
///
/// Within a cell, UE 0 is the leftmost UE and indices increase
/// counter-clockwise around the ring.
struct NetworkGeometry {
  int num_cells = 0;
  int ues_per_cell = 0;
  double cell_radius = 0.0;
  double ue_ring_radius = 0.0;
  std::vector<Point> bs_positions;   // [l]
  std::vector<Point> ue_positions;   // [l * K + k]
  std::vector<double> nominal_angles;  // [(j * L + l) * K + k], radians
  std::vector<double> link_gains;      // same indexing

  Point ue(int l, int k) const { return ue_positions[static_cast<std::size_t>(l * ues_per_cell + k)]; }
  double angle(int j, int l, int k) const { return nominal_angles[link_index(j, l, k)]; }
  double gain(int j, int l, int k) const { return link_gains[link_index(j, l, k)]; }

 private:
  std::size_t link_index(int j, int l, int k) const {
    return static_cast<std::size_t>((j * num_cells + l) * ues_per_cell + k);
  }
};

/// Large-scale gain relative to a UE at the ring radius.
double pathloss_gain(double distance_m, const SystemConfig& config);

NetworkGeometry build_geometry(const SystemConfig& config, std::uint64_t seed);

/// ULA response a(phi)[m] = exp(i*pi*m*sin(phi)), half-wavelength spacing.
CVector steering_vector(int antennas, double angle);

/// Local scattering covariance of a half-wavelength ULA with multipath
/// uniformly distributed over [angle - half_spread, angle + half_spread]:
///
///   R[m][n] = gain / (2*half_spread) * int exp(i*pi*(m-n)*sin(theta)) dtheta
///
/// With half_spread == 0 and single_path_limit set, returns gain * a * a^H.
HermitianMatrix local_scattering_covariance(int antennas, double angle, double half_spread,
                                            double gain, bool single_path_limit = false);

/// True channel statistics R_jlk for a set of observed base stations.
///
/// Each covariance carries a precomputed factor F with F*F^H = R, taken from
/// the eigendecomposition with negative eigenvalues clamped to zero.
class ChannelStatistics {
 public:
  /// covariances ordered [b][l][k] where b indexes observed_bs.
  ChannelStatistics(int num_cells, int ues_per_cell, std::vector<int> observed_bs,
                    std::vector<HermitianMatrix> covariances);

  static ChannelStatistics from_geometry(const NetworkGeometry& geometry,
                                         const SystemConfig& config,
                                         std::vector<int> observed_bs);

  int num_cells() const { return num_cells_; }
  int ues_per_cell() const { return ues_per_cell_; }
  int antennas() const { return antennas_; }
  const std::vector<int>& observed_bs() const { return observed_bs_; }
  /// Position of BS j in observed_bs(); throws if j is not observed.
  int slot(int j) const;

  const HermitianMatrix& covariance(int j, int l, int k) const;
  const CMatrix& factor(int j, int l, int k) const;

 private:
  std::size_t index(int j, int l, int k) const;

  int num_cells_ = 0;
  int ues_per_cell_ = 0;
  int antennas_ = 0;
  std::vector<int> observed_bs_;
  std::vector<HermitianMatrix> covariances_;
  std::vector<CMatrix> factors_;
};

/// Channel vectors of one coherence block, h^t_jlk for every observed BS.
struct ChannelRealization {
  int t = 0;
  std::vector<int> observed_bs;
  int ues_per_cell = 0;
  /// Per observed BS: N x (L*K), column l*K + k holds h_jlk.
  std::vector<CMatrix> per_bs;

  const CMatrix& at_bs(int j) const;
  CVector h(int j, int l, int k) const;
};

/// h = F * z with z ~ NC(0, I), independent across links and blocks.
ChannelRealization sample_channels(const ChannelStatistics& stats, int t, std::uint64_t seed);

}  // namespace gevd_mimo
