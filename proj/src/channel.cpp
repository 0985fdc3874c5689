#include "gevd_mimo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gevd_mimo/rng.hpp"

namespace gevd_mimo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kQuadratureTol = 1e-12;
constexpr unsigned kQuadratureDepth = 20;

double integrate(const auto& f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, lo, hi, kQuadratureDepth, kQuadratureTol);
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double pathloss_gain(double distance_m, const SystemConfig& config) {
  return std::pow(distance_m / config.ue_ring_radius, -config.pathloss_exponent);
}

NetworkGeometry build_geometry(const SystemConfig& config, std::uint64_t seed) {
  const int num_cells = config.num_cells;
  const int num_ues = config.ues_per_cell;
  if (num_cells != 1 && num_cells != 7) {
    throw UnsupportedLayout("build_geometry: only L = 1 or L = 7 cells are supported (got L = " +
                            std::to_string(num_cells) + ")");
  }
  if (num_ues < 1) {
    throw UnsupportedLayout("build_geometry: need at least one UE per cell");
  }
  if (config.ue_ring_radius >= config.cell_radius * std::sqrt(3.0) / 2.0) {
    throw UnsupportedLayout("build_geometry: UE ring does not fit inside the hexagon");
  }

  NetworkGeometry g;
  g.num_cells = num_cells;
  g.ues_per_cell = num_ues;
  g.cell_radius = config.cell_radius;
  g.ue_ring_radius = config.ue_ring_radius;

  // Adjacent hexagon centers are sqrt(3) * radius apart.
  g.bs_positions.push_back({0.0, 0.0});
  const double spacing = std::sqrt(3.0) * config.cell_radius;
  for (int m = 1; m < num_cells; ++m) {
    const double a = kPi / 6.0 + (m - 1) * kPi / 3.0;
    g.bs_positions.push_back({spacing * std::cos(a), spacing * std::sin(a)});
  }

  Rng rng(derive_seed(seed, StreamTag::kGeometry));
  const double step = 2.0 * kPi / num_ues;
  g.ue_positions.resize(static_cast<std::size_t>(num_cells * num_ues));
  for (int l = 0; l < num_cells; ++l) {
    const double rotation = rng.uniform(0.0, step);
    std::vector<double> angles(static_cast<std::size_t>(num_ues));
    for (int m = 0; m < num_ues; ++m) angles[static_cast<std::size_t>(m)] = rotation + m * step;

    // Leftmost UE first, then counter-clockwise.
    int first = 0;
    for (int m = 1; m < num_ues; ++m) {
      if (std::cos(angles[static_cast<std::size_t>(m)]) < std::cos(angles[static_cast<std::size_t>(first)])) {
        first = m;
      }
    }
    const Point bs = g.bs_positions[static_cast<std::size_t>(l)];
    for (int k = 0; k < num_ues; ++k) {
      const double a = angles[static_cast<std::size_t>((first + k) % num_ues)];
      g.ue_positions[static_cast<std::size_t>(l * num_ues + k)] = {
          bs.x + config.ue_ring_radius * std::cos(a), bs.y + config.ue_ring_radius * std::sin(a)};
    }
  }

  const auto links = static_cast<std::size_t>(num_cells * num_cells * num_ues);
  g.nominal_angles.resize(links);
  g.link_gains.resize(links);
  std::size_t idx = 0;
  for (int j = 0; j < num_cells; ++j) {
    const Point bs = g.bs_positions[static_cast<std::size_t>(j)];
    for (int l = 0; l < num_cells; ++l) {
      for (int k = 0; k < num_ues; ++k, ++idx) {
        const Point ue = g.ue(l, k);
        g.nominal_angles[idx] = std::atan2(ue.y - bs.y, ue.x - bs.x);
        g.link_gains[idx] = pathloss_gain(distance(bs, ue), config);
      }
    }
  }
  return g;
}

CVector steering_vector(int antennas, double angle) {
  CVector a(antennas);
  const double s = std::sin(angle);
  for (int m = 0; m < antennas; ++m) a(m) = std::polar(1.0, kPi * m * s);
  return a;
}

HermitianMatrix local_scattering_covariance(int antennas, double angle, double half_spread,
                                            double gain, bool single_path_limit) {
  if (antennas < 1) throw Error("local_scattering_covariance: need at least one antenna");
  if (!(gain > 0.0)) throw Error("local_scattering_covariance: gain must be positive");
  if (half_spread >= kPi / 2.0) {
    throw InvalidSpread("local_scattering_covariance: half spread must be below pi/2");
  }
  if (half_spread <= 0.0) {
    if (single_path_limit && half_spread == 0.0) {
      return HermitianMatrix::outer(steering_vector(antennas, angle)) * gain;
    }
    throw InvalidSpread("local_scattering_covariance: half spread must be positive");
  }

  // Toeplitz: entry (m, n) only depends on the lag d = m - n.
  // Integrated over u in [-1, 1] with theta = angle + half_spread * u, so the
  // interval width does not depend on the spread.
  std::vector<Complex> lag(static_cast<std::size_t>(antennas));
  lag[0] = 1.0;
  for (int d = 1; d < antennas; ++d) {
    auto phase = [=](double u) { return kPi * d * std::sin(angle + half_spread * u); };
    const double re = integrate([&](double u) { return std::cos(phase(u)); }, -1.0, 1.0);
    const double im = integrate([&](double u) { return std::sin(phase(u)); }, -1.0, 1.0);
    lag[static_cast<std::size_t>(d)] = Complex(0.5 * re, 0.5 * im);
  }

  CMatrix r(antennas, antennas);
  for (int m = 0; m < antennas; ++m) {
    for (int n = 0; n <= m; ++n) {
      const Complex v = gain * lag[static_cast<std::size_t>(m - n)];
      r(m, n) = v;
      r(n, m) = std::conj(v);
    }
  }
  return HermitianMatrix::from(r);
}

ChannelStatistics::ChannelStatistics(int num_cells, int ues_per_cell, std::vector<int> observed_bs,
                                     std::vector<HermitianMatrix> covariances)
    : num_cells_(num_cells),
      ues_per_cell_(ues_per_cell),
      observed_bs_(std::move(observed_bs)),
      covariances_(std::move(covariances)) {
  const auto expected = observed_bs_.size() * static_cast<std::size_t>(num_cells_ * ues_per_cell_);
  if (covariances_.size() != expected || expected == 0) {
    throw Error("ChannelStatistics: covariance count does not match the layout");
  }
  antennas_ = static_cast<int>(covariances_.front().dim());
  factors_.reserve(covariances_.size());
  for (const auto& r : covariances_) {
    if (r.dim() != antennas_) throw Error("ChannelStatistics: mixed covariance dimensions");
    if (r.frobenius_norm() == 0.0) {
      factors_.emplace_back(CMatrix::Zero(antennas_, antennas_));
      continue;
    }
    const auto eig = hermitian_eig(r);
    // Eigenvalues at rounding level belong to the null space.
    const double floor = antennas_ * std::numeric_limits<double>::epsilon() * eig.values(0);
    const RVector root = eig.values.unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
    factors_.emplace_back(eig.vectors * root.cast<Complex>().asDiagonal());
  }
}

ChannelStatistics ChannelStatistics::from_geometry(const NetworkGeometry& geometry,
                                                   const SystemConfig& config,
                                                   std::vector<int> observed_bs) {
  const double half_spread = config.angular_half_spread_deg * kPi / 180.0;
  std::vector<HermitianMatrix> covs;
  covs.reserve(observed_bs.size() * static_cast<std::size_t>(geometry.num_cells * geometry.ues_per_cell));
  for (int j : observed_bs) {
    if (j < 0 || j >= geometry.num_cells) throw Error("ChannelStatistics: BS index out of range");
    for (int l = 0; l < geometry.num_cells; ++l) {
      for (int k = 0; k < geometry.ues_per_cell; ++k) {
        covs.push_back(local_scattering_covariance(config.antennas, geometry.angle(j, l, k),
                                                   half_spread, geometry.gain(j, l, k),
                                                   half_spread == 0.0));
      }
    }
  }
  return ChannelStatistics(geometry.num_cells, geometry.ues_per_cell, std::move(observed_bs),
                           std::move(covs));
}

int ChannelStatistics::slot(int j) const {
  const auto it = std::find(observed_bs_.begin(), observed_bs_.end(), j);
  if (it == observed_bs_.end()) throw Error("ChannelStatistics: BS " + std::to_string(j) + " not observed");
  return static_cast<int>(it - observed_bs_.begin());
}

std::size_t ChannelStatistics::index(int j, int l, int k) const {
  return static_cast<std::size_t>((slot(j) * num_cells_ + l) * ues_per_cell_ + k);
}

const HermitianMatrix& ChannelStatistics::covariance(int j, int l, int k) const {
  return covariances_[index(j, l, k)];
}

const CMatrix& ChannelStatistics::factor(int j, int l, int k) const {
  return factors_[index(j, l, k)];
}

const CMatrix& ChannelRealization::at_bs(int j) const {
  const auto it = std::find(observed_bs.begin(), observed_bs.end(), j);
  if (it == observed_bs.end()) throw Error("ChannelRealization: BS " + std::to_string(j) + " not observed");
  return per_bs[static_cast<std::size_t>(it - observed_bs.begin())];
}

CVector ChannelRealization::h(int j, int l, int k) const {
  return at_bs(j).col(l * ues_per_cell + k);
}

ChannelRealization sample_channels(const ChannelStatistics& stats, int t, std::uint64_t seed) {
  Rng rng(derive_seed(seed, StreamTag::kChannels, static_cast<std::uint64_t>(t)));
  const int n = stats.antennas();
  const int links = stats.num_cells() * stats.ues_per_cell();

  ChannelRealization out;
  out.t = t;
  out.observed_bs = stats.observed_bs();
  out.ues_per_cell = stats.ues_per_cell();
  for (int j : stats.observed_bs()) {
    CMatrix h(n, links);
    for (int l = 0; l < stats.num_cells(); ++l) {
      for (int k = 0; k < stats.ues_per_cell(); ++k) {
        h.col(l * stats.ues_per_cell() + k) = stats.factor(j, l, k) * rng.complex_normal(n);
      }
    }
    out.per_bs.push_back(std::move(h));
  }
  return out;
}

}  // namespace gevd_mimo
