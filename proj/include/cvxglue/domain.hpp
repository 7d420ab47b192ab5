#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "cvxglue/types.hpp"

namespace cvxglue {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Strict half-space {x : <a, x> < b}.
struct HalfSpace {
  Vec a;
  double b = 0.0;
};

struct Ball {
  Vec center;
  double radius = 1.0;
};

/// Open convex U in R^n: all of R^n, or a finite intersection of strict
/// half-spaces with an optional open ball.
class DomainU {
 public:
  DomainU() = default;

  static DomainU all_space(int n) {
    if (n < 1) throw InvalidArgument("DomainU: dimension must be >= 1");
    DomainU d;
    d.dim_ = n;
    return d;
  }

  static DomainU intersection(int n, std::vector<HalfSpace> halfspaces, std::optional<Ball> ball = {}) {
    DomainU d = all_space(n);
    for (auto& h : halfspaces) {
      if (h.a.size() != n) throw InvalidArgument("DomainU: half-space normal has wrong dimension");
      const double na = h.a.norm();
      if (!(na > 0.0)) throw InvalidArgument("DomainU: half-space normal must be nonzero");
      // Normalize so slack = signed distance.
      h.a /= na;
      h.b /= na;
    }
    d.halfspaces_ = std::move(halfspaces);
    if (ball) {
      if (ball->center.size() != n) throw InvalidArgument("DomainU: ball center has wrong dimension");
      if (!(ball->radius > 0.0)) throw InvalidArgument("DomainU: ball radius must be positive");
    }
    d.ball_ = std::move(ball);
    return d;
  }

  int dim() const { return dim_; }
  bool is_all_space() const { return halfspaces_.empty() && !ball_; }
  const std::vector<HalfSpace>& halfspaces() const { return halfspaces_; }
  const std::optional<Ball>& ball() const { return ball_; }

  /// min over constraints of the signed distance to that constraint's
  /// boundary; positive exactly on U, +inf for all of R^n. 1-Lipschitz.
  double signed_margin(const Vec& x) const {
    double m = kInf;
    for (const auto& h : halfspaces_) m = std::min(m, h.b - h.a.dot(x));
    if (ball_) m = std::min(m, ball_->radius - (x - ball_->center).norm());
    return m;
  }

  bool contains(const Vec& x) const { return x.size() == dim_ && signed_margin(x) > 0.0; }

  /// dist(x, boundary of U) for x in U.
  double dist_to_boundary(const Vec& x) const {
    if (!contains(x)) throw DomainError("dist_to_boundary: point outside the domain");
    return signed_margin(x);
  }

  /// Point maximizing the signed margin (approximately), found by
  /// subgradient ascent; the margin there is > 0 iff U is nonempty.
  Vec deepest_point() const {
    Vec x = ball_ ? ball_->center : Vec::Zero(dim_);
    if (is_all_space()) return x;
    Vec best = x;
    double best_m = signed_margin(x);
    for (int it = 0; it < 4000; ++it) {
      Vec g = Vec::Zero(dim_);
      double m = kInf;
      for (const auto& h : halfspaces_) {
        const double s = h.b - h.a.dot(x);
        if (s < m) m = s, g = -h.a;
      }
      if (ball_) {
        const Vec d = x - ball_->center;
        const double s = ball_->radius - d.norm();
        if (s < m) {
          m = s;
          g = d.norm() > 0 ? Vec(-d / d.norm()) : Vec(Vec::Zero(dim_));
        }
      }
      if (m > best_m) best_m = m, best = x;
      if (g.norm() == 0.0) break;
      const double step = std::max(1.0, std::abs(best_m)) / std::sqrt(1.0 + it);
      x += step * g;
    }
    return best;
  }

  bool empty() const { return !is_all_space() && !(signed_margin(deepest_point()) > 0.0); }

  /// Open interval {t : x + t d in U} for x in U; bounds may be infinite.
  std::pair<double, double> line_interval(const Vec& x, const Vec& d) const {
    double tlo = -kInf, thi = kInf;
    for (const auto& h : halfspaces_) {
      const double ad = h.a.dot(d), slack = h.b - h.a.dot(x);
      if (ad > 0) thi = std::min(thi, slack / ad);
      else if (ad < 0) tlo = std::max(tlo, slack / ad);
    }
    if (ball_) {
      // |x - c + t d|^2 < r^2
      const Vec e = x - ball_->center;
      const double a = d.squaredNorm(), b = e.dot(d), c = e.squaredNorm() - ball_->radius * ball_->radius;
      const double disc = b * b - a * c;
      if (a > 0 && disc > 0) {
        const double s = std::sqrt(disc);
        tlo = std::max(tlo, (-b - s) / a);
        thi = std::min(thi, (-b + s) / a);
      }
    }
    return {tlo, thi};
  }

  /// Axis-aligned box containing U intersected with [-r, r]^n.
  std::pair<Vec, Vec> bounding_box(double r) const {
    Vec lo = Vec::Constant(dim_, -r), hi = Vec::Constant(dim_, r);
    if (ball_) {
      lo = lo.cwiseMax((ball_->center.array() - ball_->radius).matrix());
      hi = hi.cwiseMin((ball_->center.array() + ball_->radius).matrix());
    }
    // Axis-aligned half-spaces tighten the box directly.
    for (const auto& h : halfspaces_) {
      int nz = 0, idx = -1;
      for (int i = 0; i < dim_; ++i)
        if (h.a(i) != 0.0) ++nz, idx = i;
      if (nz != 1) continue;
      const double bound = h.b / h.a(idx);
      if (h.a(idx) > 0) hi(idx) = std::min(hi(idx), bound);
      else lo(idx) = std::max(lo(idx), bound);
    }
    return {lo, hi};
  }

 private:
  int dim_ = 0;
  std::vector<HalfSpace> halfspaces_;
  std::optional<Ball> ball_;
};

/// A bounded convex region given by a bounding box, a membership test and a
/// conservative intersection test for balls.
struct Region {
  Vec lo, hi;
  std::function<bool(const Vec&)> contains;
  /// false only if the closed ball (center, radius) is disjoint from the region.
  std::function<bool(const Vec&, double)> may_intersect;

  int dim() const { return static_cast<int>(lo.size()); }
  bool is_empty_box() const { return (hi.array() < lo.array()).any(); }

  static Region box(Vec lo, Vec hi) {
    Region r;
    r.lo = lo;
    r.hi = hi;
    r.contains = [lo, hi](const Vec& x) {
      return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    };
    r.may_intersect = [lo, hi](const Vec& c, double rho) {
      const Vec clamped = c.cwiseMax(lo).cwiseMin(hi);
      return (clamped - c).norm() <= rho;
    };
    return r;
  }

  static Region ball(Vec center, double radius) {
    Region r;
    r.lo = (center.array() - radius).matrix();
    r.hi = (center.array() + radius).matrix();
    r.contains = [center, radius](const Vec& x) { return (x - center).norm() <= radius; };
    r.may_intersect = [center, radius](const Vec& c, double rho) {
      return (c - center).norm() <= radius + rho;
    };
    return r;
  }
};

/// Exhaustion B_m = {x in U : dist(x, boundary U) > 1/m, |x| < m}.
class Exhaustion {
 public:
  explicit Exhaustion(DomainU domain) : domain_(std::move(domain)) {
    if (domain_.dim() < 1) throw InvalidArgument("make_exhaustion: domain has no dimension");
    if (domain_.empty()) throw InvalidArgument("make_exhaustion: empty domain");
  }

  const DomainU& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }

  bool contains(int m, const Vec& x) const {
    if (m < 1) return false;
    if (!(x.norm() < m)) return false;
    return domain_.signed_margin(x) > 1.0 / m;
  }

  /// Smallest m with x in B_m; throws for x outside U.
  int stage_of(const Vec& x) const {
    if (!domain_.contains(x)) throw DomainError("exhaustion: point outside the domain");
    const double d = domain_.signed_margin(x);
    double m = std::floor(x.norm()) + 1.0;
    if (std::isfinite(d)) m = std::max(m, std::floor(1.0 / d) + 1.0);
    if (m > 1e9) throw DomainError("exhaustion: point too close to the boundary");
    int mi = std::max(1, static_cast<int>(m) - 1);
    while (!contains(mi, x)) ++mi;
    return mi;
  }

  /// B_m as a Region (bounding box plus exact membership).
  Region stage_region(int m) const {
    if (m < 1) throw InvalidArgument("exhaustion: stage index must be >= 1");
    Region r;
    std::tie(r.lo, r.hi) = domain_.bounding_box(static_cast<double>(m));
    const DomainU dom = domain_;
    r.contains = [dom, m](const Vec& x) { return x.norm() < m && dom.signed_margin(x) > 1.0 / m; };
    // Both the margin and the norm are 1-Lipschitz.
    r.may_intersect = [dom, m](const Vec& c, double rho) {
      return c.norm() < m + rho && dom.signed_margin(c) > 1.0 / m - rho;
    };
    return r;
  }

  /// True when B_m has no points. Maximizes min(m - |x|, margin(x) - 1/m) by
  /// subgradient ascent, so a tiny nonempty B_m may be reported empty; the
  /// glue then falls through to a later stage, which is still valid there.
  bool stage_empty(int m) const {
    if (m < 1) return true;
    if (domain_.is_all_space()) return false;
    auto phi = [&](const Vec& x, Vec* g) {
      const double r = x.norm();
      double v = m - r;
      if (g) *g = r > 0 ? Vec(-x / r) : Vec(Vec::Zero(dim()));
      for (const auto& h : domain_.halfspaces()) {
        const double s = h.b - h.a.dot(x) - 1.0 / m;
        if (s < v) {
          v = s;
          if (g) *g = -h.a;
        }
      }
      if (const auto& b = domain_.ball()) {
        const Vec d = x - b->center;
        const double s = b->radius - d.norm() - 1.0 / m;
        if (s < v) {
          v = s;
          if (g) *g = d.norm() > 0 ? Vec(-d / d.norm()) : Vec(Vec::Zero(dim()));
        }
      }
      return v;
    };
    Vec x = domain_.deepest_point();
    if (x.norm() > 0.5 * m) x *= 0.5 * m / x.norm();
    Vec g;
    double best = phi(x, &g);
    for (int it = 0; it < 4000 && !(best > 0.0); ++it) {
      if (g.norm() == 0.0) break;
      x += (std::max(1.0, static_cast<double>(m)) / std::sqrt(1.0 + it)) * g;
      best = std::max(best, phi(x, &g));
    }
    return !(best > 0.0);
  }

  /// dist(B_m, boundary U) lower bound, +inf for all of R^n.
  double stage_margin(int m) const { return domain_.is_all_space() ? kInf : 1.0 / m; }

 private:
  DomainU domain_;
};

inline Exhaustion make_exhaustion(const DomainU& U) { return Exhaustion(U); }

}  // namespace cvxglue
