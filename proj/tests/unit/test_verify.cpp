#include <catch_amalgamated.hpp>

#include <cmath>

#include "cvxglue/verify.hpp"

using namespace cvxglue;
using Catch::Approx;

namespace {

const Region unit = Region::box(Vec::Constant(1, -1), Vec::Constant(1, 1));

double neg_square(const Vec& x) { return -x.squaredNorm(); }
double absval(const Vec& x) { return std::abs(x(0)); }

}  // namespace

TEST_CASE("convexity sampler flags -x^2 and accepts |x|") {
  const CheckReport bad = check_convexity(neg_square, unit);
  CHECK_FALSE(bad.pass);
  // oracle: the midpoint defect of -x^2 is (x - y)^2 / 4, grid maximum 1 at x = -y = 1
  double brute = 0;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      const double x = -1 + i / 100.0, y = -1 + j / 100.0;
      brute = std::max(brute, -(0.25 * (x + y) * (x + y)) + 0.5 * (x * x + y * y));
    }
  CHECK(brute == Approx(1.0));
  CHECK(bad.metric >= 0.25);
  CHECK(bad.metric <= brute + 1e-12);
  CHECK(bad.details.contains("x"));

  const CheckReport good = check_convexity(absval, unit);
  CHECK(good.pass);
  CHECK(good.metric <= 1e-12);
}

TEST_CASE("sandwich check on shifted copies") {
  const CheckReport in = check_sandwich(absval, [](const Vec& x) { return std::abs(x(0)) - 0.05; }, unit, 0.1, 500);
  CHECK(in.pass);
  CHECK(in.metric == Approx(0.05));
  CHECK(in.details["min_gap"].get<double>() == Approx(0.05));
  const CheckReport above = check_sandwich(absval, [](const Vec& x) { return std::abs(x(0)) + 0.01; }, unit, 0.1, 500);
  CHECK_FALSE(above.pass);
  const CheckReport far = check_sandwich(absval, [](const Vec& x) { return std::abs(x(0)) - 0.2; }, unit, 0.1, 500);
  CHECK_FALSE(far.pass);
}

TEST_CASE("Lipschitz sampler") {
  const Region wide = Region::box(Vec::Constant(2, -3), Vec::Constant(2, 3));
  auto norm = [](const Vec& x) { return x.norm(); };
  const CheckReport ok = check_lipschitz(norm, wide, 1.0, 4000);
  CHECK(ok.pass);
  CHECK(ok.metric <= 1.0 + 1e-9);
  CHECK(ok.metric >= 0.99);
  CHECK_FALSE(check_lipschitz(norm, wide, 0.5, 4000).pass);
}

TEST_CASE("strong convexity sampler") {
  const CheckReport sq = check_strong_convexity([](const Vec& x) { return x.squaredNorm(); },
                                                Region::box(Vec::Constant(2, -1), Vec::Constant(2, 1)), 200);
  CHECK(sq.pass);
  CHECK(sq.metric == Approx(2.0).epsilon(1e-5));
  // |x - y| is flat along (1, 1) and away from the kink
  const CheckReport flat = check_strong_convexity([](const Vec& x) { return std::abs(x(0) - x(1)); },
                                                  Region::box(Vec::Constant(2, -1), Vec::Constant(2, 1)), 200);
  CHECK_FALSE(flat.pass);
  CHECK(flat.details["nonpositive_lines"].get<int>() > 150);
}

TEST_CASE("derivative check against a smooth expression") {
  Mat Q(2, 2);
  Q << 1, 0.2, 0.2, 0.5;
  const Expr g = expr::sum({expr::quad_form(Q, Vec::Zero(2), 0.0), expr::exp_affine(make_vec({0.3, -0.1}), 0.0)});
  const CheckReport r = check_derivatives(g, Region::box(Vec::Constant(2, -2), Vec::Constant(2, 2)), 50);
  CHECK(r.pass);
  CHECK(r.metric <= 1e-6);
}

TEST_CASE("growth audit reports the largest gap over the three radii") {
  auto f = [](const Vec& x) { return x.norm(); };
  auto g = [](const Vec& x) { return x.norm() - 0.1 * std::min(1.0, x.norm() / 40); };
  const CheckReport r = growth_audit(f, g, 2, 10.0, 0.2);
  CHECK(r.pass);
  CHECK(r.metric == Approx(0.1));
  CHECK(r.details["radii"].size() == 3);
  CHECK_FALSE(growth_audit(f, g, 2, 10.0, 0.05).pass);
}

TEST_CASE("reports aggregate and serialize") {
  VerifyReport v{{check_convexity(absval, unit, 100), check_convexity(neg_square, unit, 100)}};
  CHECK_FALSE(v.pass());
  const json j = v.to_json();
  CHECK(j["checks"].size() == 2);
  CHECK(j["pass"] == false);
  CHECK(v.to_text().find("overall FAIL") != std::string::npos);
}

TEST_CASE("counterexample demos pass and are reproducible") {
  for (const char* name : {"ex7_1", "ex7_2", "ex7_3"}) {
    const DemoReport a = counterexample_demo(name, 5), b = counterexample_demo(name, 5);
    CHECK(a.pass);
    CHECK(a.to_json().dump() == b.to_json().dump());
  }
  CHECK_THROWS_AS(counterexample_demo("ex9"), InvalidArgument);
}
