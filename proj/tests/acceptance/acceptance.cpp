// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cvxglue/cvxglue.hpp"

using namespace cvxglue;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Vec sample_ball(Rng& rng, int n, double R) { return rng.uniform_ball(Vec::Zero(n), R); }

// 1. max <= M <= max + eps/2 for both profiles; poly is exact outside the band.
Outcome smooth_max_laws() {
  Rng rng(101);
  double worst_low = 0, worst_high = 0, worst_exact = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.uniform(-10, 10);
    const double y = rng.uniform() < 0.3 ? x + rng.uniform(-1, 1) * 1e-3 : rng.uniform(-10, 10);
    const double eps = std::pow(10.0, rng.uniform(-3, 0));
    const double mx = std::max(x, y);
    for (auto th : {Theta::poly(eps), Theta::gauss(eps)}) {
      const double m = smooth_max_value(x, y, th);
      worst_low = std::max(worst_low, mx - m);
      worst_high = std::max(worst_high, m - (mx + eps / 2));
      if (th.backend() == ThetaBackend::Poly && std::abs(x - y) >= eps)
        worst_exact = std::max(worst_exact, std::abs(m - mx));
    }
  }
  const bool ok = worst_low <= 0.0 && worst_high <= 1e-12 && worst_exact <= 1e-14;
  return {ok, fmt("max-M %.2e, M-(max+eps/2) %.2e, poly off-band |M-max| %.2e", worst_low, worst_high, worst_exact)};
}

// 2. Gaussian profile: second derivative against finite differences of the value.
Outcome gauss_theta() {
  Rng rng(202);
  double worst = 0, at_zero = 0;
  for (int i = 0; i < 1000; ++i) {
    const double eps = std::pow(10.0, rng.uniform(-2, 0));
    const Theta th = Theta::gauss(eps);
    const double r = std::numbers::pi * eps * eps / 16.0;
    const double t = rng.uniform(-2, 2) * eps;
    const double h = 1e-2 * eps;
    // |t| is linear on stencils away from 0, so difference the small excess there.
    auto v = [&](double s) { return std::abs(t) > h ? th.excess(s) : th.value(s); };
    auto D = [&](double s) { return (v(t + s) - 2 * v(t) + v(t - s)) / (s * s); };
    const double fd = (4 * D(h / 2) - D(h)) / 3;  // Richardson
    const double closed = 2 * std::exp(-t * t / (4 * r)) / std::sqrt(4 * std::numbers::pi * r);
    worst = std::max(worst, std::abs(fd - closed) / closed);
    at_zero = std::max(at_zero, std::abs(th.value(0.0) - eps));
  }
  return {worst <= 1e-8 && at_zero <= 1e-12, fmt("max rel FD mismatch %.2e, |theta(0)-eps| %.2e", worst, at_zero)};
}

struct GlueCase {
  std::string name;
  GluedApproximant g;
  OraclePtr f;
};

// 3. Glue e^x + x^2 (R) and e^x + (x-y)^2 (R^2), eps = 0.1, N = 12.
Outcome glue_global() {
  const double eps = 0.1;
  std::vector<GlueCase> cases;
  {
    auto f = std::make_shared<const ConvexOracle>(
        family::sum({family::exp_dir(Vec::Ones(1), 0.0), family::quadform(Mat::Identity(1, 1), Vec::Zero(1), 0.0)}));
    cases.push_back({"1-D", glue(f, f->domain, eps, hyperplane_approximator(), 12), f});
  }
  {
    Mat Q(2, 2);
    Q << 1, -1, -1, 1;
    auto f = std::make_shared<const ConvexOracle>(
        family::sum({family::exp_dir(make_vec({1, 0}), 0.0), family::quadform(Q, Vec::Zero(2), 0.0)}));
    const Expr closed = expr::sum({expr::exp_affine(make_vec({1, 0}), 0.0), expr::quad_form(Q, Vec::Zero(2), 0.0)});
    cases.push_back({"2-D", glue(f, f->domain, eps, shift_approximator(closed), 12), f});
  }
  bool ok = true;
  std::string detail;
  for (auto& c : cases) {
    const int n = c.f->dim();
    Rng rng(303 + n);
    double lo = kInf, hi = -kInf, conv = -kInf, consist = 0;
    for (int i = 0; i < 4000; ++i) {
      const Vec x = sample_ball(rng, n, 10.0), y = sample_ball(rng, n, 10.0);
      const double fx = c.f->value(x), gx = c.g.value(x);
      lo = std::min(lo, fx - gx);
      hi = std::max(hi, fx - gx);
      conv = std::max(conv, c.g.value(0.5 * (x + y)) - 0.5 * (gx + c.g.value(y)));
      if (i % 8 == 0) {
        const int s = c.g.stage_for(x);
        for (int m = s + 1; m <= 12; ++m)
          consist = std::max(consist, std::abs(c.g.evaluate_at_stage(x, m).value - gx));
      }
    }
    const bool case_ok = lo >= 0.0 && hi <= 2 * eps + 1e-9 && conv <= 1e-10 && consist <= 1e-12;
    ok = ok && case_ok;
    detail += c.name + fmt(": f-g in [%.3g, %.4g], midpoint viol %.2e, stage diff %.2e; ", lo, hi, conv, consist);
  }
  return {ok, detail};
}

// 4. Corner max{0, x1, x2}, eps = 0.1, on |x| <= 20.
Outcome corner() {
  Mat L(3, 2);
  L << 0, 0, 1, 0, 0, 1;
  const Corner C{L, Vec::Zero(3)};
  const Expr G = strongly_convex_corner_approx(C, 0.1);
  auto Cv = [](const Vec& x) { return std::max({0.0, x(0), x(1)}); };
  Rng rng(404);
  double lo = kInf, hi = -kInf;
  for (int i = 0; i < 10000; ++i) {
    const Vec x = sample_ball(rng, 2, 20.0);
    const double d = value(G, x) - Cv(x);
    lo = std::min(lo, d), hi = std::max(hi, d);
  }
  const CheckReport sc = check_strong_convexity([&](const Vec& x) { return value(G, x); },
                                                Region::ball(Vec::Zero(2), 20.0), 1000, 1e-3, 405);
  const int bad = sc.details["nonpositive_lines"].get<int>();
  const bool ok = lo >= 0.0 && hi <= 0.1 + 1e-9 && sc.pass;
  return {ok, fmt("G-C in [%.3g, %.3g]; min second difference %.3g, nonpositive on %g of 1000 lines", lo, hi,
                  sc.metric, bad)};
}

// 5. Classification, stable under tol x 10^{-1,0,1}.
Outcome classifier() {
  Mat W(4, 2);
  W << 1, 0, -1, 0, 0, 2, 0, -1;  // a1 x1 + b1, c1 x1 + d1, a2 x2 + b2, c2 x2 + d2
  const Vec b = make_vec({-1, 0, 0, 0.5});
  struct Case {
    const char* name;
    OraclePtr f;
    StrongApproxClass want;
    int k;
  };
  const std::vector<Case> cases{
      {"|x-y|", std::make_shared<const ConvexOracle>(family::abs_comp(make_vec({1, -1}), 0.0)),
       StrongApproxClass::Factors, 1},
      {"four-piece h", std::make_shared<const ConvexOracle>(family::max_affine(W, b)), StrongApproxClass::Approximable,
       -1},
      {"affine", std::make_shared<const ConvexOracle>(family::affine(make_vec({1, 2}), 0.5)),
       StrongApproxClass::Factors, 0}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    for (double tol : {1e-9, 1e-8, 1e-7}) {
      FactorizationOptions opt;
      opt.tol = tol;
      const Classification r = classify_strong_approx(c.f, opt);
      const int k = r.factorization ? r.factorization->k : -1;
      ok = ok && r.kind == c.want && k == c.k;
      if (tol == 1e-8) detail += std::string(c.name) + " -> " + to_string(r.kind) + (k >= 0 ? " k=" + std::to_string(k) : "") + "; ";
    }
  }
  return {ok, detail + "stable for tol in {1e-9, 1e-8, 1e-7}"};
}

// 6. Moreau envelope of |x| is Huber; argmin of |x| + x^2 is kept.
Outcome moreau_check() {
  auto absf = std::make_shared<const ConvexOracle>(family::abs_comp(Vec::Ones(1), 0.0));
  double worst = 0;
  for (double lambda : {0.1, 1.0}) {
    const MoreauEnvelope env = moreau(absf, lambda);
    for (int i = 0; i <= 1000; ++i) {
      const double x = -5.0 + 10.0 * i / 1000;
      const double huber = std::abs(x) <= lambda ? x * x / (2 * lambda) : std::abs(x) - lambda / 2;
      worst = std::max(worst, std::abs(env.value(Vec::Constant(1, x)) - huber));
    }
  }
  auto g = std::make_shared<const ConvexOracle>(
      family::sum({family::abs_comp(Vec::Ones(1), 0.0), family::quadform(Mat::Identity(1, 1), Vec::Zero(1), 0.0)}));
  double arg_err = 0;
  for (double lambda : {0.1, 1.0}) {
    // The envelope gradient (x - prox x) / lambda is monotone; bisect for its zero.
    const MoreauEnvelope env = moreau(g, lambda);
    double lo = -5.0, hi = 5.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (env.gradient(Vec::Constant(1, mid))(0) < 0 ? lo : hi) = mid;
    }
    arg_err = std::max(arg_err, std::abs(0.5 * (lo + hi)));  // argmin of |x| + x^2 is 0
  }
  return {worst <= 1e-6 && arg_err <= 1e-6, fmt("max |f_lambda - huber| %.2e, argmin drift %.2e", worst, arg_err)};
}

// 7. Difference quotients of glued |x| on [-50, 50].
Outcome lipschitz() {
  auto f = std::make_shared<const ConvexOracle>(family::abs_comp(Vec::Ones(1), 0.0));
  GluedApproximant g = glue(f, f->domain, 0.1, hyperplane_approximator(), 52);
  const CheckReport r = check_lipschitz([&](const Vec& x) { return g.value(x); },
                                        Region::box(Vec::Constant(1, -50), Vec::Constant(1, 50)), 1.0, 20000, 1e-6, 707);
  return {r.pass, fmt("max difference quotient %.10f over %g pairs", r.metric, r.samples)};
}

// 8. Unit disc, eps = 0.1.
Outcome body() {
  SmoothBodyOptions opt;
  opt.stages = 4;
  const SmoothBody D = smooth_body(Body::ball(Vec::Zero(2), 1.0), 0.1, opt);
  const VerifyReport r = check_body(D, Region::box(Vec::Constant(2, -2), Vec::Constant(2, 2)), 10000, 1e-3, 1e-3, 808);
  const auto& c = r.checks;
  return {r.pass(), fmt("inner violations %g/%g, outer violations %g/%g", c[0].metric, c[0].samples, c[1].metric,
                        c[1].samples) +
                        fmt(", min |grad g| on {g=0} %.4f over %g points", c[2].metric, c[2].samples)};
}

// 9. Counterexample demos, twice with the same seed.
Outcome demos() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"ex7_1", "ex7_2"}) {
    const DemoReport a = counterexample_demo(name, 909), b = counterexample_demo(name, 909);
    const bool same = a.to_json().dump() == b.to_json().dump();
    ok = ok && a.pass && same;
    detail += std::string(name) + fmt(": %.4g > %.4g", a.quantity, a.threshold) + (same ? " (deterministic); " : " (NOT deterministic); ");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{smooth_max_laws, gauss_theta, glue_global, corner, classifier,
                                                       moreau_check,    lipschitz,   body,         demos};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu: %s  %s  [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
