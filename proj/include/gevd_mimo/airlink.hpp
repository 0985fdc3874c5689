#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gevd_mimo/channel.hpp"
#include "gevd_mimo/config.hpp"
#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

/// tau_p orthogonal unit-modulus pilot sequences; row b holds s_b.
/// Pilot indices are zero-based throughout the library.
struct PilotBook {
  int tau_p = 0;
  CMatrix sequences;

  CVector sequence(int b) const { return sequences.row(b).transpose(); }
};

/// DFT rows: s_b(p) = exp(-2*pi*i*b*p / tau_p).
PilotBook make_pilot_book(int tau_p);

enum class AllocationMode { kRandom, kFixedCyclic };

/// Pilot index b^t_lk for every block, cell and UE.
struct PilotAllocation {
  AllocationMode mode = AllocationMode::kRandom;
  int blocks = 0;
  int num_cells = 0;
  int ues_per_cell = 0;
  int tau_p = 0;
  std::vector<int> indices;  // [(t * L + l) * K + k]

  int at(int t, int l, int k) const {
    return indices[static_cast<std::size_t>((t * num_cells + l) * ues_per_cell + k)];
  }
  /// The L*K pilot indices of block t, ordered [l * K + k].
  std::span<const int> block(int t) const {
    const auto per_block = static_cast<std::size_t>(num_cells * ues_per_cell);
    return std::span<const int>(indices).subspan(static_cast<std::size_t>(t) * per_block, per_block);
  }
};

/// Random mode draws every index uniformly and independently; block t uses
/// its own stream derived from (seed, t). Fixed-cyclic mode assigns
/// (l * K + k) mod tau_p in every block, so the cycle continues across cells.
PilotAllocation allocate_pilots(int blocks, int num_cells, int ues_per_cell, int tau_p,
                                AllocationMode mode, std::uint64_t seed);
PilotAllocation allocate_pilots(const SystemConfig& config, AllocationMode mode, std::uint64_t seed);

/// A spatially located interferer seen by every antenna of the BS.
struct Jammer {
  CVector steering;
  double power = 0.0;
};

/// R_nn = sigma^2 * I + rho * a * a^H.
HermitianMatrix make_noise_covariance(int antennas, double noise_power,
                                      const std::optional<Jammer>& jammer = std::nullopt);

/// Noise covariance with its Cholesky factor for sampling.
class NoiseModel {
 public:
  explicit NoiseModel(HermitianMatrix covariance);
  /// Noise-free receiver.
  static NoiseModel none(int antennas);

  const HermitianMatrix& covariance() const { return covariance_; }
  const CMatrix& factor() const { return factor_; }

 private:
  HermitianMatrix covariance_;
  CMatrix factor_;
};

/// Received samples of one coherence block at each observed BS.
struct BlockSignals {
  int t = 0;
  std::vector<int> observed_bs;
  std::vector<CMatrix> pilot_rx;  // N x tau_p per BS
  std::vector<CMatrix> data_rx;   // N x tau_u per BS

  const CMatrix& pilot_at(int j) const;
  const CMatrix& data_at(int j) const;
};

/// Synthesizes both phases of block t for every BS in the realization.
///
/// block_pilots holds b^t_lk ordered [l * K + k]; powers holds p_lk in the same
/// order. Noise is drawn per sample as F_n * z; data symbols are uniform on the
/// unit circle and shared by all BSs.
BlockSignals simulate_block(int t, const ChannelRealization& channels,
                            std::span<const int> block_pilots, const PilotBook& book,
                            std::span<const double> powers, const NoiseModel& noise, int tau_u,
                            std::uint64_t seed);

/// sum_p pilot_rx(:, p) * conj(s_b(p)).
CVector despread(const CMatrix& pilot_rx, const PilotBook& book, int b);

}  // namespace gevd_mimo
