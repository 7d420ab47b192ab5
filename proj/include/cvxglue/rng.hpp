#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "cvxglue/types.hpp"

namespace cvxglue {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** generator seeded through splitmix64.
///
/// Distributions are implemented here instead of through <random> so that a
/// seed reproduces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x5eed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  /// Independent child stream; the same (seed, stream) pair always gives
  /// the same child regardless of how much the parent was consumed.
  Rng split(std::uint64_t stream) const {
    std::uint64_t s = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    return Rng(splitmix64(s));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec uniform_box(const Vec& lo, const Vec& hi) {
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x(i) = uniform(lo(i), hi(i));
    return x;
  }

  /// Uniform direction on the unit sphere of R^n.
  Vec direction(int n) {
    Vec v(n);
    do {
      for (int i = 0; i < n; ++i) v(i) = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

  /// Uniform point in the ball of the given center and radius.
  Vec uniform_ball(const Vec& center, double radius) {
    const int n = static_cast<int>(center.size());
    const double r = radius * std::pow(uniform(), 1.0 / n);
    return center + r * direction(n);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

}  // namespace cvxglue
