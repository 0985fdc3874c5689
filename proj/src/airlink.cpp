#include "gevd_mimo/airlink.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gevd_mimo/rng.hpp"

namespace gevd_mimo {

PilotBook make_pilot_book(int tau_p) {
  if (tau_p < 1) throw Error("make_pilot_book: tau_p must be at least 1");
  PilotBook book;
  book.tau_p = tau_p;
  book.sequences.resize(tau_p, tau_p);
  for (int b = 0; b < tau_p; ++b) {
    for (int p = 0; p < tau_p; ++p) {
      // Reduce the exponent modulo tau_p so the phase stays exact for large b*p.
      const int e = (b * p) % tau_p;
      if (e == 0) {
        book.sequences(b, p) = 1.0;
      } else {
        book.sequences(b, p) = std::polar(1.0, -2.0 * std::numbers::pi * e / tau_p);
      }
    }
  }
  return book;
}

PilotAllocation allocate_pilots(int blocks, int num_cells, int ues_per_cell, int tau_p,
                                AllocationMode mode, std::uint64_t seed) {
  if (tau_p < 1) throw Error("allocate_pilots: tau_p must be at least 1");
  PilotAllocation a;
  a.mode = mode;
  a.blocks = blocks;
  a.num_cells = num_cells;
  a.ues_per_cell = ues_per_cell;
  a.tau_p = tau_p;
  const int per_block = num_cells * ues_per_cell;
  a.indices.resize(static_cast<std::size_t>(blocks * per_block));
  for (int t = 0; t < blocks; ++t) {
    auto* row = a.indices.data() + static_cast<std::ptrdiff_t>(t) * per_block;
    if (mode == AllocationMode::kFixedCyclic) {
      for (int u = 0; u < per_block; ++u) row[u] = u % tau_p;
    } else {
      Rng rng(derive_seed(seed, StreamTag::kPilots, static_cast<std::uint64_t>(t)));
      for (int u = 0; u < per_block; ++u) row[u] = rng.uniform_index(tau_p);
    }
  }
  return a;
}

PilotAllocation allocate_pilots(const SystemConfig& config, AllocationMode mode, std::uint64_t seed) {
  return allocate_pilots(config.coherence_blocks, config.num_cells, config.ues_per_cell,
                         config.tau_p, mode, seed);
}

HermitianMatrix make_noise_covariance(int antennas, double noise_power,
                                      const std::optional<Jammer>& jammer) {
  if (!(noise_power > 0.0)) throw Error("make_noise_covariance: noise power must be positive");
  HermitianMatrix r = HermitianMatrix::identity(antennas) * noise_power;
  if (jammer && jammer->power != 0.0) {
    if (jammer->power < 0.0) throw Error("make_noise_covariance: jammer power must be nonnegative");
    if (jammer->steering.size() != antennas) {
      throw Error("make_noise_covariance: jammer steering vector has the wrong length");
    }
    r += HermitianMatrix::outer(jammer->steering) * jammer->power;
  }
  return r;
}

NoiseModel::NoiseModel(HermitianMatrix covariance)
    : covariance_(std::move(covariance)), factor_(cholesky(covariance_)) {}

NoiseModel NoiseModel::none(int antennas) {
  NoiseModel m(HermitianMatrix::identity(antennas));
  m.covariance_ = HermitianMatrix(antennas);
  m.factor_ = CMatrix::Zero(antennas, antennas);
  return m;
}

const CMatrix& BlockSignals::pilot_at(int j) const {
  const auto it = std::find(observed_bs.begin(), observed_bs.end(), j);
  if (it == observed_bs.end()) throw Error("BlockSignals: BS " + std::to_string(j) + " not observed");
  return pilot_rx[static_cast<std::size_t>(it - observed_bs.begin())];
}

const CMatrix& BlockSignals::data_at(int j) const {
  const auto it = std::find(observed_bs.begin(), observed_bs.end(), j);
  if (it == observed_bs.end()) throw Error("BlockSignals: BS " + std::to_string(j) + " not observed");
  return data_rx[static_cast<std::size_t>(it - observed_bs.begin())];
}

BlockSignals simulate_block(int t, const ChannelRealization& channels,
                            std::span<const int> block_pilots, const PilotBook& book,
                            std::span<const double> powers, const NoiseModel& noise, int tau_u,
                            std::uint64_t seed) {
  if (channels.per_bs.empty()) throw Error("simulate_block: no observed BS");
  const auto links = channels.per_bs.front().cols();
  if (static_cast<Eigen::Index>(block_pilots.size()) != links ||
      static_cast<Eigen::Index>(powers.size()) != links) {
    throw Error("simulate_block: pilot/power vectors do not match the number of UEs");
  }
  if (tau_u < 1) throw Error("simulate_block: tau_u must be at least 1");
  const int tau_p = book.tau_p;
  const auto n = channels.per_bs.front().rows();
  if (noise.factor().rows() != n) throw Error("simulate_block: noise dimension mismatch");

  // Transmitted symbols, scaled by sqrt(p): rows are UEs.
  CMatrix pilot_tx(links, tau_p);
  for (Eigen::Index u = 0; u < links; ++u) {
    const int b = block_pilots[static_cast<std::size_t>(u)];
    if (b < 0 || b >= tau_p) throw Error("simulate_block: pilot index out of range");
    pilot_tx.row(u) = std::sqrt(powers[static_cast<std::size_t>(u)]) * book.sequences.row(b);
  }
  Rng data_rng(derive_seed(seed, StreamTag::kData, static_cast<std::uint64_t>(t)));
  CMatrix data_tx(links, tau_u);
  for (Eigen::Index u = 0; u < links; ++u) {
    const double amp = std::sqrt(powers[static_cast<std::size_t>(u)]);
    for (int s = 0; s < tau_u; ++s) data_tx(u, s) = amp * data_rng.unit_phase();
  }

  Rng noise_rng(derive_seed(seed, StreamTag::kNoise, static_cast<std::uint64_t>(t)));
  BlockSignals out;
  out.t = t;
  out.observed_bs = channels.observed_bs;
  for (const CMatrix& h : channels.per_bs) {
    CMatrix pilot = h * pilot_tx;
    CMatrix data = h * data_tx;
    pilot.noalias() += noise.factor() * noise_rng.complex_normal(n, tau_p);
    data.noalias() += noise.factor() * noise_rng.complex_normal(n, tau_u);
    out.pilot_rx.push_back(std::move(pilot));
    out.data_rx.push_back(std::move(data));
  }
  return out;
}

CVector despread(const CMatrix& pilot_rx, const PilotBook& book, int b) {
  if (b < 0 || b >= book.tau_p) throw Error("despread: pilot index out of range");
  if (pilot_rx.cols() != book.tau_p) throw Error("despread: sample count differs from tau_p");
  return pilot_rx * book.sequences.row(b).adjoint();
}

}  // namespace gevd_mimo
