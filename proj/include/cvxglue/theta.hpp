#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "cvxglue/types.hpp"

namespace cvxglue {

enum class ThetaBackend { Poly, Gauss };

inline std::string to_string(ThetaBackend b) { return b == ThetaBackend::Poly ? "poly" : "gauss"; }

/// Smoothed absolute value, the kernel of every smooth maximum.
///
/// Both backends are even, convex, 1-Lipschitz and satisfy
/// |t| <= theta(t) <= |t| + epsilon.
///
/// Poly: theta = |.| * delta_eps with delta_eps(s) = C_k (1 - (s/eps)^2)^k / eps on
/// [-eps, eps]. It equals |t| exactly for |t| >= eps and is C^{k+1}.
///
/// Gauss: theta = |.| * H_r + eps/2 with the heat kernel
/// H_r(t) = exp(-t^2 / 4r) / sqrt(4 pi r) and r = pi eps^2 / 16, which makes the
/// gap at the origin exactly eps. theta > |t| everywhere and theta'' > 0.
class Theta {
 public:
  struct Derivs {
    double value;
    double d1;
    double d2;
  };

  static Theta poly(double epsilon, int k = 4) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw InvalidArgument("theta_poly: epsilon must be positive and finite");
    if (k < 2) throw InvalidArgument("theta_poly: mollifier exponent k must be >= 2");
    Theta th(ThetaBackend::Poly, epsilon);
    th.k_ = k;
    // (1 - w)^k = sum_j binom(k, j) (-1)^j w^j with w = v^2.
    std::vector<double> binom(static_cast<std::size_t>(k) + 1, 1.0);
    for (int j = 1; j <= k; ++j) binom[j] = binom[j - 1] * (k - j + 1) / j;
    double mass = 0.0;
    for (int j = 0; j <= k; ++j) mass += 2.0 * binom[j] * ((j % 2) ? -1.0 : 1.0) / (2.0 * j + 1.0);
    const double c = 1.0 / mass;
    th.phi_.resize(k + 1);
    th.p1_.resize(k + 1);
    th.p2_.resize(k + 1);
    for (int j = 0; j <= k; ++j) {
      const double a = c * binom[j] * ((j % 2) ? -1.0 : 1.0);
      th.phi_[j] = a;
      th.p1_[j] = a / (2.0 * j + 1.0);
      th.p2_[j] = a / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
    }
    th.theta0_unit_ = c / (k + 1.0);
    return th;
  }

  static Theta gauss(double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw InvalidArgument("theta_gauss: epsilon must be positive and finite");
    Theta th(ThetaBackend::Gauss, epsilon);
    th.variance_ = std::numbers::pi * epsilon * epsilon / 16.0;
    return th;
  }

  ThetaBackend backend() const { return backend_; }
  double epsilon() const { return epsilon_; }
  int k() const { return k_; }
  /// Heat-kernel time r of the Gauss backend (0 for Poly).
  double variance() const { return variance_; }

  /// Highest derivative order the profile supports.
  int max_order() const {
    return backend_ == ThetaBackend::Poly ? k_ + 1 : std::numeric_limits<int>::max();
  }

  double value(double t) const { return std::abs(t) + excess(t); }

  /// theta(t) - |t| >= 0, evaluated without cancellation against |t|.
  double excess(double t) const {
    const double a = std::abs(t);
    if (backend_ == ThetaBackend::Poly) {
      const double u = a / epsilon_;
      if (u >= 1.0) return 0.0;
      const double w = u * u;
      const double e = theta0_unit_ + 2.0 * w * horner(p2_, w) - u;
      return epsilon_ * std::max(e, 0.0);
    }
    const double s = 2.0 * std::sqrt(variance_);
    const double z = a / s;
    const double tail = std::exp(-z * z) / std::sqrt(std::numbers::pi) - z * std::erfc(z);
    return s * std::max(tail, 0.0) + 0.5 * epsilon_;
  }

  double d1(double t) const {
    if (backend_ == ThetaBackend::Poly) {
      const double u = t / epsilon_;
      if (u >= 1.0) return 1.0;
      if (u <= -1.0) return -1.0;
      return 2.0 * u * horner(p1_, u * u);
    }
    return std::erf(t / (2.0 * std::sqrt(variance_)));
  }

  double d2(double t) const {
    if (backend_ == ThetaBackend::Poly) {
      const double u = t / epsilon_;
      if (std::abs(u) >= 1.0) return 0.0;
      return 2.0 * horner(phi_, u * u) / epsilon_;
    }
    return 2.0 * std::exp(-t * t / (4.0 * variance_)) / std::sqrt(4.0 * std::numbers::pi * variance_);
  }

  Derivs derivs(double t) const { return {value(t), d1(t), d2(t)}; }

  /// Mollifier density delta_eps(s) of the Poly backend; theta'' = 2 delta_eps.
  double mollifier(double s) const {
    if (backend_ != ThetaBackend::Poly) return 0.5 * d2(s);
    const double u = s / epsilon_;
    if (std::abs(u) >= 1.0) return 0.0;
    return horner(phi_, u * u) / epsilon_;
  }

  /// sup_t (theta(t) - |t|), attained at t = 0.
  double max_excess() const { return excess(0.0); }

  bool operator==(const Theta& o) const {
    return backend_ == o.backend_ && epsilon_ == o.epsilon_ && k_ == o.k_;
  }

 private:
  Theta(ThetaBackend b, double eps) : backend_(b), epsilon_(eps) {}

  static double horner(const std::vector<double>& c, double w) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * w + *it;
    return acc;
  }

  ThetaBackend backend_;
  double epsilon_;
  int k_ = 0;
  double variance_ = 0.0;
  double theta0_unit_ = 0.0;
  // Coefficients in w = u^2 of phi(u), P1(u)/u and P2(u)/u^2 for the Poly backend.
  std::vector<double> phi_, p1_, p2_;
};

/// (x + y + theta(x - y)) / 2 written as max(x, y) + excess / 2, so the
/// lower bound max <= M holds exactly in floating point.
inline double smooth_max_value(double x, double y, const Theta& theta) {
  return std::max(x, y) + 0.5 * theta.excess(x - y);
}

}  // namespace cvxglue
