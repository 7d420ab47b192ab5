#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cvxglue/corners.hpp"
#include "cvxglue/domain.hpp"
#include "cvxglue/expr.hpp"
#include "cvxglue/expr_json.hpp"
#include "cvxglue/regularize.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/smoothmax.hpp"

namespace cvxglue {

using ScalarFn = std::function<double(const Vec&)>;

struct CheckReport {
  std::string name;
  bool pass = false;
  double metric = 0.0;
  double threshold = 0.0;
  int samples = 0;
  json details = json::object();

  json to_json() const {
    return {{"name", name}, {"pass", pass},   {"metric", metric},
            {"threshold", threshold}, {"samples", samples}, {"details", details}};
  }

  std::string to_text() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s %s  metric=%.6e  threshold=%.6e  samples=%d", name.c_str(),
                  pass ? "PASS" : "FAIL", metric, threshold, samples);
    return buf;
  }
};

namespace detail {

// Uniform points of the region by rejection from its bounding box.
inline Vec sample_in(const Region& r, Rng& rng) {
  for (int t = 0; t < 100000; ++t) {
    const Vec x = rng.uniform_box(r.lo, r.hi);
    if (r.contains(x)) return x;
  }
  throw ConvergenceError("sampling: region has negligible volume in its bounding box");
}

// Calls fn(i) for i in [0, n) on a few threads; callers write results by
// index so the merge order never depends on scheduling.
template <class F>
void parallel_for(int n, F&& fn) {
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int T = std::min(hw, std::max(1, n / 64));
  if (T <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs(T);
  std::vector<std::thread> pool;
  for (int t = 0; t < T; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += T) fn(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Max over random segments of g((x+y)/2) - (g(x)+g(y))/2; pass iff <= tol.
inline CheckReport check_convexity(const ScalarFn& g, const Region& region, int trials = 10000, double tol = 1e-10,
                                   std::uint64_t seed = 1) {
  Rng rng(seed);
  CheckReport r{"convexity"};
  r.metric = -std::numeric_limits<double>::infinity();
  r.threshold = tol;
  std::vector<Vec> xs(trials), ys(trials);
  for (int i = 0; i < trials; ++i) xs[i] = detail::sample_in(region, rng), ys[i] = detail::sample_in(region, rng);
  std::vector<double> v(trials);
  detail::parallel_for(trials, [&](int i) { v[i] = g(0.5 * (xs[i] + ys[i])) - 0.5 * (g(xs[i]) + g(ys[i])); });
  Vec worst_x, worst_y;
  for (int i = 0; i < trials; ++i)
    if (v[i] > r.metric) r.metric = v[i], worst_x = xs[i], worst_y = ys[i];
  r.samples = trials;
  r.pass = r.metric <= tol;
  if (worst_x.size()) r.details = {{"x", to_json(worst_x)}, {"y", to_json(worst_y)}};
  return r;
}

/// Samples f - g; pass iff -tol <= f - g <= eps_low + tol everywhere sampled.
inline CheckReport check_sandwich(const ScalarFn& f, const ScalarFn& g, const Region& region, double eps_low,
                                  int samples = 10000, double tol = 1e-9, std::uint64_t seed = 2) {
  Rng rng(seed);
  CheckReport r{"sandwich"};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<Vec> xs(samples);
  for (auto& x : xs) x = detail::sample_in(region, rng);
  std::vector<double> d(samples);
  detail::parallel_for(samples, [&](int i) { d[i] = f(xs[i]) - g(xs[i]); });
  for (double di : d) lo = std::min(lo, di), hi = std::max(hi, di);
  r.samples = samples;
  r.metric = hi;
  r.threshold = eps_low + tol;
  r.pass = lo >= -tol && hi <= eps_low + tol;
  r.details = {{"min_gap", lo}, {"max_gap", hi}, {"eps_low", eps_low}};
  return r;
}

/// Max difference quotient over random pairs, half of them at short range.
inline CheckReport check_lipschitz(const ScalarFn& g, const Region& region, double L, int pairs = 10000,
                                   double tol = 1e-6, std::uint64_t seed = 3) {
  Rng rng(seed);
  CheckReport r{"lipschitz"};
  const double diam = (region.hi - region.lo).norm();
  for (int i = 0; i < pairs; ++i) {
    const Vec x = detail::sample_in(region, rng);
    Vec y;
    if (i % 2 == 0) {
      y = detail::sample_in(region, rng);
    } else {
      do {
        const double h = diam * std::pow(10.0, -rng.uniform(1.0, 6.0));
        y = x + h * rng.direction(static_cast<int>(x.size()));
      } while (!region.contains(y));
    }
    const double d = (x - y).norm();
    if (!(d > 0)) continue;
    r.metric = std::max(r.metric, std::abs(g(x) - g(y)) / d);
  }
  r.samples = pairs;
  r.threshold = L + tol;
  r.pass = r.metric <= L + tol;
  return r;
}

/// Minimum of (g(x+hv) - 2 g(x) + g(x-hv)) / h^2 over random points and unit directions.
inline CheckReport check_strong_convexity(const ScalarFn& g, const Region& region, int segments = 1000,
                                          double step = 1e-3, std::uint64_t seed = 4) {
  Rng rng(seed);
  CheckReport r{"strong_convexity"};
  r.metric = std::numeric_limits<double>::infinity();
  int nonpositive = 0;
  for (int i = 0; i < segments; ++i) {
    const Vec x = detail::sample_in(region, rng);
    const Vec v = rng.direction(static_cast<int>(x.size()));
    const double d2 = (g(x + step * v) - 2.0 * g(x) + g(x - step * v)) / (step * step);
    r.metric = std::min(r.metric, d2);
    if (!(d2 > 0)) ++nonpositive;
  }
  r.samples = segments;
  r.threshold = 0.0;
  r.pass = r.metric > 0.0;
  r.details = {{"nonpositive_lines", nonpositive}, {"step", step}};
  return r;
}

/// Max relative mismatch of exact gradient/Hessian against central differences.
inline CheckReport check_derivatives(const Expr& g, const Region& region, int points = 200, double step = 1e-4,
                                     double tol = 1e-5, std::uint64_t seed = 5) {
  Rng rng(seed);
  CheckReport r{"derivatives"};
  const int n = g.dim();
  double gworst = 0.0, hworst = 0.0;
  for (int i = 0; i < points; ++i) {
    const Vec x = detail::sample_in(region, rng);
    const Eval e = evaluate(g, x, 2);
    if (e.nonsmooth) continue;
    for (int a = 0; a < n; ++a) {
      const Vec ea = step * Vec::Unit(n, a);
      const double fd = (value(g, x + ea) - value(g, x - ea)) / (2.0 * step);
      gworst = std::max(gworst, std::abs(fd - e.gradient(a)) / std::max(1.0, std::abs(e.gradient(a))));
      const Eval ep = evaluate(g, x + ea, 1), em = evaluate(g, x - ea, 1);
      for (int b = 0; b < n; ++b) {
        const double hd = (ep.gradient(b) - em.gradient(b)) / (2.0 * step);
        hworst = std::max(hworst, std::abs(hd - e.hessian(a, b)) / std::max(1.0, std::abs(e.hessian(a, b))));
      }
    }
  }
  r.samples = points;
  r.metric = std::max(gworst, hworst);
  r.threshold = tol;
  r.pass = r.metric <= tol;
  r.details = {{"gradient", gworst}, {"hessian", hworst}, {"step", step}};
  return r;
}

/// max_{|x| = R} (f - g) at R, 2R, 4R along random directions.
inline CheckReport growth_audit(const ScalarFn& f, const ScalarFn& g, int n, double R, double bound,
                                int directions = 64, std::uint64_t seed = 6) {
  Rng rng(seed);
  CheckReport r{"growth_audit"};
  json radii = json::array();
  for (double rad : {R, 2 * R, 4 * R}) {
    double worst = 0.0;
    for (int i = 0; i < directions; ++i) {
      const Vec x = rad * rng.direction(n);
      worst = std::max(worst, std::abs(f(x) - g(x)));
    }
    radii.push_back({{"radius", rad}, {"max_abs_gap", worst}});
    r.metric = std::max(r.metric, worst);
  }
  r.samples = 3 * directions;
  r.threshold = bound;
  r.pass = r.metric <= bound;
  r.details = {{"radii", radii}};
  return r;
}

struct VerifyReport {
  std::vector<CheckReport> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.pass; });
  }
  json to_json() const {
    json a = json::array();
    for (const auto& c : checks) a.push_back(c.to_json());
    return {{"schema_version", kSchemaVersion}, {"pass", pass()}, {"checks", a}};
  }
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) os << c.to_text() << "\n";
    os << (pass() ? "overall PASS" : "overall FAIL") << "\n";
    return os.str();
  }
};

struct DemoReport {
  std::string name;
  bool pass = false;
  double quantity = 0.0;
  double threshold = 0.0;
  json details = json::object();
  std::string note;

  json to_json() const {
    return {{"schema_version", kSchemaVersion}, {"demo", name},          {"pass", pass},
            {"quantity", quantity},            {"threshold", threshold}, {"note", note},
            {"details", details}};
  }
};

namespace detail {

// Smooth convex minorants of |x| from the library at budget eps: the
// smoothed tangent max and the strongly convex corner approximant, both
// shifted to lie below |x|.
inline std::vector<std::pair<std::string, ScalarFn>> abs_candidates(double eps) {
  const Vec one = Vec::Ones(1);
  auto f = std::make_shared<const ConvexOracle>(family::abs_comp(one, 0.0));
  const Expr m = pl_minorant(*f, Region::box(-one, one), eps / 2);
  const Expr h = smooth_minorant(m, eps / 2, 0.0);
  Mat L(2, 1);
  L << 1.0, -1.0;
  const Expr G = expr::shifted(strongly_convex_corner_approx(Corner{L, Vec::Zero(2)}, eps), -eps);
  return {{"smooth_minorant", [h](const Vec& x) { return value(h, x); }},
          {"corner", [G](const Vec& x) { return value(G, x); }}};
}

}  // namespace detail

/// Obstructions to decaying-budget approximation, evaluated on this library's own approximants
/// with decaying budget eps(x) = 1 / (1 + |x|).
inline DemoReport counterexample_demo(const std::string& name, std::uint64_t seed = 7) {
  DemoReport r;
  r.name = name;
  Rng rng(seed);
  auto decay = [](const Vec& x) { return 1.0 / (1.0 + x.norm()); };

  if (name == "ex7_1") {
    // f = |x| on R; for C^1 convex g <= f with g(0) <= 0 the gap cannot vanish at infinity.
    r.threshold = decay(Vec::Constant(1, 1000.0));
    double weakest = std::numeric_limits<double>::infinity();
    json rows = json::array();
    for (double eps : {0.1, 0.01, 0.003}) {
      for (const auto& [label, g] : detail::abs_candidates(eps)) {
        const double g0 = g(Vec::Zero(1));
        double persistent = std::numeric_limits<double>::infinity();
        json gaps = json::array();
        for (double R : {10.0, 100.0, 1000.0}) {
          const double gap =
              std::min(R - g(Vec::Constant(1, R)), R - g(Vec::Constant(1, -R)));  // |x| - g at x = +-R
          persistent = std::min(persistent, gap);
          gaps.push_back({{"R", R}, {"gap", gap}, {"budget", decay(Vec::Constant(1, R))}});
        }
        rows.push_back({{"candidate", label}, {"eps", eps}, {"g0", g0}, {"gaps", gaps}, {"persistent_gap", persistent}});
        if (g0 <= 0.0) weakest = std::min(weakest, persistent);
      }
    }
    r.quantity = weakest;
    r.pass = weakest > r.threshold;
    r.details = {{"candidates", rows}};
    r.note = "min over R in {10,100,1000} of |x| - g(x) stays above the decayed budget 1/(1+1000)";
    return r;
  }

  if (name == "ex7_2" || name == "ex7_3") {
    // f(x1, x2) = |x1| (ex7_2) or alpha(x1) (ex7_3). Project a smooth candidate
    // into the band |f - g| <= eps(x) and look at h(y) = g(0, y).
    const bool alpha = name == "ex7_3";
    const Theta th = Theta::poly(1.0);
    auto f = [&](const Vec& x) {
      if (!alpha) return std::abs(x(0));
      const double s = std::abs(x(0)) - 2.0;  // alpha = M_1(0, |t| - 2): 0 on |t| <= 1, |t| - 2 on |t| >= 3
      return smooth_max_value(0.0, s, th);
    };
    const double delta = 0.2;
    const Theta smooth = Theta::gauss(delta);
    // Candidate: Gaussian smooth max of the pieces of f, >= f by at most delta / 2.
    auto cand = [&](const Vec& x) {
      if (!alpha) return smooth_max_value(x(0), -x(0), smooth);
      return smooth_max_value(0.0, smooth_max_value(x(0) - 2.0, -x(0) - 2.0, smooth), smooth);
    };
    auto banded = [&](const Vec& x) {
      const double e = decay(x), fx = f(x);
      return std::clamp(cand(x), fx - e, fx + e);
    };
    auto h = [&](double y) { return banded(make_vec({0.0, y})); };
    const double h0 = h(0.0);
    json profile = json::array();
    for (double y : {0.0, 1.0, 10.0, 100.0, 1000.0}) profile.push_back({{"y", y}, {"h", h(y)}});
    double best = -std::numeric_limits<double>::infinity();
    json triple;
    for (int i = 0; i < 2000; ++i) {
      const double Y = std::pow(10.0, rng.uniform(0.0, 4.0));
      const double a = -Y * rng.uniform(0.5, 1.5), b = Y * rng.uniform(0.5, 1.5);
      const double t = -a / (b - a);  // 0 = (1 - t) a + t b
      const double v = h(0.0) - ((1.0 - t) * h(a) + t * h(b));
      if (v > best) best = v, triple = {{"a", a}, {"mid", 0.0}, {"b", b}, {"violation", v}};
    }
    r.quantity = best;
    r.threshold = h0 / 2.0;
    r.pass = h0 > 0.0 && best > r.threshold;
    r.details = {{"h0", h0}, {"profile", profile}, {"worst_triple", triple}};
    r.note = alpha ? "convex-obstruction part only; real-analytic rigidity is out of numerical reach"
                   : "any g within the decaying band has h(0) > 0 and h(y) -> 0, so h is not convex";
    return r;
  }
  throw InvalidArgument("counterexample_demo: unknown demo '" + name + "' (ex7_1, ex7_2, ex7_3)");
}

}  // namespace cvxglue
