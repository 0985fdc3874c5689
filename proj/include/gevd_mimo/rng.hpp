#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "gevd_mimo/linalg.hpp"

namespace gevd_mimo {

/// Stream domains for seed derivation. Each domain gets statistically
/// independent child streams.
enum class StreamTag : std::uint64_t {
  kRun = 1,
  kGeometry = 2,
  kEstimationBlock = 3,
  kEvaluationBlock = 4,
  kChannels = 5,
  kPilots = 6,
  kNoise = 7,
  kData = 8,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based child seed: a pure function of (parent, tag, index), so the
/// streams a worker uses never depend on scheduling.
std::uint64_t derive_seed(std::uint64_t parent, StreamTag tag, std::uint64_t index = 0);

/// Random source used throughout the simulator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Circularly-symmetric complex normal with unit variance, NC(0, 1).
  Complex complex_normal();
  CVector complex_normal(Eigen::Index n);
  CMatrix complex_normal(Eigen::Index rows, Eigen::Index cols);
  /// Uniform on the complex unit circle.
  Complex unit_phase();
  /// Uniform integer in [0, n).
  int uniform_index(int n);
  double uniform(double lo, double hi);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gevd_mimo
