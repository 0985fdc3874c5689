#include "gevd_mimo/rng.hpp"

#include <cmath>
#include <numbers>

namespace gevd_mimo {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, StreamTag tag, std::uint64_t index) {
  std::uint64_t s = mix64(parent);
  s = mix64(s ^ static_cast<std::uint64_t>(tag));
  return mix64(s ^ index);
}

Complex Rng::complex_normal() {
  constexpr double kScale = 0.70710678118654752440;  // 1/sqrt(2)
  const double re = normal_(engine_);
  const double im = normal_(engine_);
  return {re * kScale, im * kScale};
}

CVector Rng::complex_normal(Eigen::Index n) {
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_normal();
  return v;
}

CMatrix Rng::complex_normal(Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = complex_normal();
  return m;
}

Complex Rng::unit_phase() {
  const double phase = uniform(0.0, 2.0 * std::numbers::pi);
  return {std::cos(phase), std::sin(phase)};
}

int Rng::uniform_index(int n) {
  std::uniform_int_distribution<int> dist(0, n - 1);
  return dist(engine_);
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

}  // namespace gevd_mimo
