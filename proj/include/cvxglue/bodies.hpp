#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "cvxglue/corners.hpp"
#include "cvxglue/glue.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/regularize.hpp"
#include "cvxglue/verify.hpp"

namespace cvxglue {

inline constexpr int kMaxFacets = 64;

/// Closed convex body: polytope {A x <= b}, Euclidean ball, or their intersection.
class Body {
 public:
  enum class Kind { Polytope, Ball, Intersection };

  static Body polytope(Mat A, Vec b) {
    if (A.rows() != b.size()) throw InvalidArgument("polytope: A and b have different row counts");
    if (A.rows() < 1 || A.rows() > kMaxFacets)
      throw InvalidArgument("polytope: facet count must be in [1, " + std::to_string(kMaxFacets) + "]");
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (!(A.row(i).norm() > 0.0)) throw InvalidArgument("polytope: row " + std::to_string(i) + " of A is zero");
    Body B;
    B.kind_ = Kind::Polytope;
    B.A_ = std::move(A);
    B.b_ = std::move(b);
    B.dim_ = static_cast<int>(B.A_.cols());
    return B;
  }

  static Body ball(Vec center, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("ball: radius must be positive");
    Body B;
    B.kind_ = Kind::Ball;
    B.c_ = std::move(center);
    B.r_ = radius;
    B.dim_ = static_cast<int>(B.c_.size());
    return B;
  }

  static Body intersection(const Body& P, const Body& Bl) {
    if (P.kind_ != Kind::Polytope || Bl.kind_ != Kind::Ball)
      throw InvalidArgument("intersection: expected a polytope and a ball");
    if (P.dim_ != Bl.dim_) throw InvalidArgument("intersection: dimension mismatch");
    Body B = P;
    B.kind_ = Kind::Intersection;
    B.c_ = Bl.c_;
    B.r_ = Bl.r_;
    return B;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }
  const Vec& center() const { return c_; }
  double radius() const { return r_; }

  bool contains(const Vec& x, double tol = 0.0) const {
    if (has_facets() && ((A_ * x - b_).array() > tol).any()) return false;
    if (has_ball() && (x - c_).norm() > r_ + tol) return false;
    return true;
  }

  /// Nearest point of the body.
  Vec project(const Vec& x) const {
    if (x.size() != dim_) throw InvalidArgument("body: point has wrong dimension");
    switch (kind_) {
      case Kind::Ball:
        return project_ball(x);
      case Kind::Polytope:
        return project_polytope(x);
      case Kind::Intersection:
        return project_intersection(x);
    }
    throw Error("unreachable");
  }

  double distance(const Vec& x) const { return (x - project(x)).norm(); }

  /// Throws if the body is empty (checked through a projection).
  void require_nonempty() const {
    const Vec p = project(has_ball() ? c_ : Vec(Vec::Zero(dim_)));
    if (!contains(p, 1e-7)) throw InvalidArgument("body: empty");
  }

  json to_json() const {
    json j{{"dim", dim_}};
    if (kind_ == Kind::Ball) j["kind"] = "ball";
    if (kind_ == Kind::Polytope) j["kind"] = "polytope";
    if (kind_ == Kind::Intersection) j["kind"] = "intersection";
    if (has_facets()) j["A"] = cvxglue::to_json(A_), j["b"] = cvxglue::to_json(b_);
    if (has_ball()) j["center"] = cvxglue::to_json(c_), j["radius"] = r_;
    return j;
  }

 private:
  bool has_facets() const { return kind_ != Kind::Ball; }
  bool has_ball() const { return kind_ != Kind::Polytope; }

  Vec project_ball(const Vec& x) const {
    const Vec d = x - c_;
    const double n = d.norm();
    return n <= r_ ? x : Vec(c_ + (r_ / n) * d);
  }

  // Goldfarb-Idnani dual active set for min 1/2 |y - x|^2 s.t. A y <= b.
  // Starts at y = x and adds violated facets one at a time; active normals
  // stay linearly independent, and an unfixable violation means C is empty.
  Vec project_polytope(const Vec& x) const {
    if (((A_ * x - b_).array() <= 0.0).all()) return x;
    const int m = static_cast<int>(A_.rows());
    const double scale = 1.0 + b_.cwiseAbs().maxCoeff() + x.norm() * A_.rowwise().norm().maxCoeff();
    const double feas_tol = 1e-12 * scale;
    Vec y = x;
    std::vector<int> act;
    std::vector<double> u;
    auto normals = [&]() {
      Mat N(dim_, act.size());
      for (std::size_t k = 0; k < act.size(); ++k) N.col(k) = A_.row(act[k]).transpose();
      return N;
    };
    for (int iter = 0; iter < 50 * m + 50; ++iter) {
      // most violated facet
      int p = -1;
      double worst = feas_tol;
      for (int i = 0; i < m; ++i) {
        if (std::find(act.begin(), act.end(), i) != act.end()) continue;
        const double v = (A_.row(i).dot(y) - b_(i)) / A_.row(i).norm();
        if (v > worst) worst = v, p = i;
      }
      if (p < 0) return y;
      double up = 0.0;
      const Vec np = A_.row(p).transpose();
      for (int inner = 0; inner <= m; ++inner) {
        const Mat N = normals();
        Vec r = Vec::Zero(static_cast<Eigen::Index>(act.size()));
        Vec z = np;
        if (!act.empty()) {
          r = N.completeOrthogonalDecomposition().solve(np);
          z = np - N * r;
        }
        // partial step: the first active multiplier to hit zero
        double t1 = kInf;
        int l = -1;
        for (std::size_t k = 0; k < act.size(); ++k)
          if (r(k) > 1e-14 && u[k] / r(k) < t1) t1 = u[k] / r(k), l = static_cast<int>(k);
        const double zz = z.dot(np);
        const double slack = A_.row(p).dot(y) - b_(p);
        const double t2 = zz > 1e-14 * np.squaredNorm() ? slack / zz : kInf;
        if (!std::isfinite(t1) && !std::isfinite(t2)) throw InvalidArgument("polytope: empty (infeasible facets)");
        const double t = std::min(t1, t2);
        for (std::size_t k = 0; k < act.size(); ++k) u[k] -= t * r(k);
        up += t;
        if (std::isfinite(t2)) y -= t * z;
        if (t2 <= t1) {
          act.push_back(p);
          u.push_back(up);
          break;
        }
        act.erase(act.begin() + l);
        u.erase(u.begin() + l);
      }
    }
    throw Error("polytope projection did not converge");
  }

  // With the ball constraint active, y(mu) = proj_P((x + mu c) / (1 + mu)) for
  // the multiplier mu >= 0 solving |y(mu) - c| = r; |y(mu) - c| is
  // nonincreasing in mu, so bisect on it.
  Vec project_intersection(const Vec& x) const {
    const Vec p = project_polytope(x);
    if ((p - c_).norm() <= r_) return p;
    auto y_of = [&](double mu) { return project_polytope(Vec((x + mu * c_) / (1.0 + mu))); };
    double lo = 0.0, hi = 1.0;
    while ((y_of(hi) - c_).norm() > r_) {
      hi *= 2.0;
      if (hi > 1e300) throw InvalidArgument("body: polytope and ball do not intersect");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      ((y_of(mid) - c_).norm() > r_ ? lo : hi) = mid;
    }
    return y_of(hi);
  }

  Kind kind_ = Kind::Ball;
  int dim_ = 0;
  Mat A_;
  Vec b_;
  Vec c_;
  double r_ = 0.0;
};

/// x -> dist(x, C) on R^n with the unit subgradient (x - P x) / |x - P x| outside.
inline ConvexOracle distance_oracle(const Body& C) {
  ConvexOracle o;
  o.name = "dist";
  o.domain = DomainU::all_space(C.dim());
  o.value = [C](const Vec& x) { return C.distance(x); };
  o.subgradient = [C](const Vec& x) {
    const Vec d = x - C.project(x);
    const double n = d.norm();
    return n > 0.0 ? Vec(d / n) : Vec(Vec::Zero(x.size()));
  };
  o.lipschitz = [](const Region&) { return 1.0; };
  return o;
}

struct SmoothBodyOptions {
  int stages = 6;
  PlMinorantOptions pl;
  GlueOptions glue;
};

/// D = {g <= 0} with f - 2 eps / 3 <= g <= f - eps / 3 for f = dist(., C), so
/// C is inside the interior of D and D lies within C + eps B.
struct SmoothBody {
  Body body;
  double epsilon = 0.0;
  GlobalApproximation g;

  double value(const Vec& x) const { return g.value(x); }
  Eval evaluate(const Vec& x, int order = 1) const { return g.evaluate(x, order); }
  bool inside(const Vec& x) const { return value(x) <= 0.0; }
};

inline SmoothBody smooth_body(const Body& C, double epsilon, const SmoothBodyOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw InvalidArgument("smooth_body: epsilon must be positive");
  C.require_nonempty();
  auto f = std::make_shared<const ConvexOracle>(distance_oracle(C));
  // Glue at eps / 6 gives f - eps / 3 <= G <= f.
  GluedApproximant G = glue(f, f->domain, epsilon / 6.0, hyperplane_approximator(ThetaBackend::Poly, 4, opt.pl),
                            opt.stages, opt.glue);
  const int n = C.dim();
  return {C, epsilon,
          GlobalApproximation::pulled(Mat::Identity(n, n), Vec::Zero(n), -epsilon / 3.0,
                                      GlobalApproximation::glued(std::move(G)))};
}

/// Sampled checks C in {g <= 0} in C + eps B and |grad g| away from zero near {g = 0}.
inline VerifyReport check_body(const SmoothBody& D, const Region& region, int samples = 10000, double grad_floor = 1e-3,
                               double level_tol = 1e-3, std::uint64_t seed = 11) {
  Rng rng(seed);
  const Body& C = D.body;
  const int n = C.dim();
  CheckReport inner{"body_inner"}, outer{"body_outer"}, grad{"body_gradient"};
  int inner_bad = 0, outer_bad = 0, inner_n = 0, outer_n = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec x = detail::sample_in(region, rng);
    const double d = C.distance(x), g = D.value(x);
    if (d == 0.0) {
      ++inner_n;
      if (!(g <= 0.0)) ++inner_bad;
    } else if (d > D.epsilon) {
      ++outer_n;
      if (g <= 0.0) ++outer_bad;
    }
  }
  inner.samples = inner_n;
  inner.metric = inner_bad;
  inner.pass = inner_bad == 0;
  outer.samples = outer_n;
  outer.metric = outer_bad;
  outer.pass = outer_bad == 0;

  // Points on {g = 0}: bisection along rays from a point of C.
  const Vec base = C.project(C.kind() == Body::Kind::Polytope ? Vec(Vec::Zero(n)) : C.center());
  double min_grad = kInf;
  int tested = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec u = rng.direction(n);
    double lo = 0.0, hi = 1.0;
    // rays nearly parallel to an unbounded C can leave the realized stages
    while (D.g.covers(base + hi * u) && D.value(base + hi * u) <= 0.0) hi *= 2.0;
    if (!D.g.covers(base + hi * u) || D.value(base + lo * u) > 0.0) continue;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (D.value(base + mid * u) <= 0.0 ? lo : hi) = mid;
    }
    const Vec x = base + 0.5 * (lo + hi) * u;
    const Eval e = D.evaluate(x, 1);
    if (std::abs(e.value) > level_tol) continue;
    ++tested;
    min_grad = std::min(min_grad, e.gradient.norm());
  }
  grad.samples = tested;
  grad.metric = min_grad;
  grad.threshold = grad_floor;
  grad.pass = tested > 0 && min_grad >= grad_floor;
  return {{inner, outer, grad}};
}

/// Epigraph of x^2 in R^2: the eps/2-neighbourhood boundary y = g(x) drifts
/// from x^2 by about (eps/2) sqrt(1 + 4x^2), so no uniform graph
/// approximation survives the body smoothing.
inline DemoReport epigraph_demo(double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epigraph_demo: epsilon must be positive");
  auto dist = [](double x, double y) {
    if (y >= x * x) return 0.0;
    // Nearest parabola point: minimize (t - x)^2 + (t^2 - y)^2.
    auto phi = [&](double t) { return (t - x) * (t - x) + (t * t - y) * (t * t - y); };
    const double hi = std::max(std::abs(x), std::sqrt(std::max(0.0, std::abs(y)))) + 1.0;
    double t = minimize_1d(phi, -hi, hi, 52).first;
    // Brent stops at ~sqrt(machine eps) * |t|, far too coarse once phi'' ~ 12 t^2
    for (int it = 0; it < 20; ++it) {
      const double d1 = 2.0 * (t - x) + 4.0 * t * (t * t - y), d2 = 2.0 + 12.0 * t * t - 4.0 * y;
      if (!(d2 > 0.0)) break;
      const double step = d1 / d2;
      t -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(t))) break;
    }
    return std::sqrt(std::max(0.0, phi(t)));
  };
  DemoReport r;
  r.name = "epigraph";
  json rows = json::array();
  double first = 0.0, last = 0.0;
  bool increasing = true;
  double prev = -1.0;
  for (double x : {1.0, 10.0, 100.0, 1000.0}) {
    // Lowest y with dist((x, y), C) <= eps / 2.
    double lo = x * x - epsilon * (1.0 + 2.0 * std::abs(x)), hi = x * x;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (dist(x, mid) <= epsilon / 2.0 ? hi : lo) = mid;
    }
    const double gap = x * x - hi;
    rows.push_back({{"x", x}, {"gap", gap}, {"predicted", 0.5 * epsilon * std::sqrt(1.0 + 4.0 * x * x)}});
    if (prev >= 0.0 && !(gap > prev)) increasing = false;
    if (prev < 0.0) first = gap;
    prev = last = gap;
  }
  r.quantity = last / first;
  r.threshold = 10.0;
  r.pass = increasing && r.quantity > r.threshold;
  r.details = {{"rows", rows}};
  r.note = "graph gap f - g of the smoothed epigraph grows without bound";
  return r;
}

}  // namespace cvxglue
