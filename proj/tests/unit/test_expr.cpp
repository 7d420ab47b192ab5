#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cvxglue/expr_json.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/smoothmax.hpp"

using namespace cvxglue;
using Catch::Approx;

namespace {

// Central differences of value() for the gradient and of gradient() for the Hessian.
void check_against_differences(const Expr& e, const Vec& x, double tol) {
  const int n = e.dim();
  const Eval ev = evaluate(e, x, 2);
  const double h = 1e-5;
  for (int i = 0; i < n; ++i) {
    const Vec d = h * Vec::Unit(n, i);
    const double fd = (value(e, x + d) - value(e, x - d)) / (2 * h);
    CHECK(ev.gradient(i) == Approx(fd).margin(tol));
    const Vec gp = evaluate(e, x + d, 1).gradient, gm = evaluate(e, x - d, 1).gradient;
    for (int j = 0; j < n; ++j) CHECK(ev.hessian(i, j) == Approx((gp(j) - gm(j)) / (2 * h)).margin(tol));
  }
}

Expr sample_tree() {
  Mat Q(2, 2);
  Q << 2, 0.5, 0.5, 1;
  const Expr q = expr::quad_form(Q, make_vec({0.1, -0.2}), 0.3);
  const Expr a = expr::affine(make_vec({1, -1}), 0.2);
  const Expr ramp = expr::gauss_ramp(make_vec({0.5, 1}), -0.1, 0.05);
  const Expr m = smooth_max(q, a, Theta::poly(0.4));
  const Expr e = expr::exp_affine(make_vec({0.3, 0.2}), 0.0, 0.5);
  Mat A(2, 2);
  A << 1, 1, 0, 1;
  const Expr pre = expr::affine_precompose(A, make_vec({0.1, 0.0}), smooth_max(ramp, e, Theta::gauss(0.2)));
  return expr::sum({m, expr::scale(0.7, pre)});
}

}  // namespace

TEST_CASE("expression values match hand-written formulas") {
  const Vec x = make_vec({0.3, -0.7});
  Mat Q(2, 2);
  Q << 2, 0.5, 0.5, 1;
  CHECK(value(expr::quad_form(Q, make_vec({1, 1}), 2), x) == Approx(x.dot(Q * x) + x.sum() + 2));
  CHECK(value(expr::exp_affine(make_vec({1, 2}), 0.5, 3), x) == Approx(3 * std::exp(0.3 - 1.4 + 0.5)));
  Mat W(3, 2);
  W << 1, 0, 0, 1, -1, -1;
  CHECK(value(expr::max_of_affine(W, make_vec({0, 0.5, 0})), x) == Approx(0.4));
  // ramp(s) = max(s, 0) + excess / 2 with the Gaussian excess of variance a
  const double a = 0.3, s = 0.25;
  const double sd = 2 * std::sqrt(a), z = s / sd;
  const double excess = sd * (std::exp(-z * z) / std::sqrt(std::numbers::pi) - z * std::erfc(z));
  CHECK(value(expr::gauss_ramp(make_vec({1}), 0.0, a), make_vec({s})) == Approx(s + 0.5 * excess).epsilon(1e-13));
}

TEST_CASE("gradients and Hessians agree with finite differences") {
  const Expr e = sample_tree();
  Rng rng(8);
  for (int i = 0; i < 20; ++i) check_against_differences(e, rng.uniform_box(Vec::Constant(2, -2), Vec::Constant(2, 2)), 2e-5);
}

TEST_CASE("gauss ramp second derivative is the heat kernel") {
  const double a = 0.2;
  const Expr r = expr::gauss_ramp(make_vec({1}), 0.0, a);
  for (double x : {-3.0, -1.0, 0.0, 0.4, 2.5}) {
    const double closed = std::exp(-x * x / (4 * a)) / std::sqrt(4 * std::numbers::pi * a);
    CHECK(evaluate(r, make_vec({x}), 2).hessian(0, 0) == Approx(closed).epsilon(1e-12));
  }
  // overshoot over max(s, 0) at s = 0 is sqrt(a / pi)
  CHECK(value(r, make_vec({0.0})) == Approx(std::sqrt(a / std::numbers::pi)).epsilon(1e-13));
}

TEST_CASE("nested smooth max equals the right fold of binary smooth maxima") {
  Rng rng(9);
  std::vector<Expr> pieces;
  std::vector<Vec> ws;
  std::vector<double> bs;
  for (int j = 0; j < 7; ++j) {
    ws.push_back(rng.uniform_box(Vec::Constant(2, -1), Vec::Constant(2, 1)));
    bs.push_back(rng.uniform(-0.2, 0.2));
    pieces.push_back(expr::affine(ws.back(), bs.back()));
  }
  for (const Theta& th : {Theta::poly(0.3), Theta::gauss(0.3)}) {
    const Expr nested = nested_smooth_max(pieces, th);
    for (int i = 0; i < 50; ++i) {
      const Vec x = rng.uniform_box(Vec::Constant(2, -1), Vec::Constant(2, 1));
      double acc = ws.back().dot(x) + bs.back();
      for (int j = 5; j >= 0; --j) acc = smooth_max_value(ws[j].dot(x) + bs[j], acc, th);
      CHECK(value(nested, x) == Approx(acc).epsilon(1e-14));
    }
    check_against_differences(nested, make_vec({0.1, 0.2}), 2e-5);
  }
}

TEST_CASE("max of affine takes the lowest index on ties and flags the kink") {
  Mat W(2, 1);
  W << 1, -1;
  const Expr m = expr::max_of_affine(W, Vec::Zero(2));
  const Eval e = evaluate(m, make_vec({0.0}), 1);
  CHECK(e.gradient(0) == 1.0);
  CHECK(e.nonsmooth);
  CHECK_FALSE(evaluate(m, make_vec({0.5}), 1).nonsmooth);
}

TEST_CASE("expression JSON round trip preserves values") {
  const Expr e = sample_tree();
  const json j = expr_to_json(e);
  CHECK(j["schema_version"] == 1);
  const Expr back = expr_from_json(json::parse(j.dump()));
  CHECK(node_count(back) == node_count(e));
  Rng rng(10);
  for (int i = 0; i < 30; ++i) {
    const Vec x = rng.uniform_box(Vec::Constant(2, -2), Vec::Constant(2, 2));
    CHECK(value(back, x) == value(e, x));
  }
}

TEST_CASE("schema errors name the offending field") {
  json j = expr_to_json(expr::affine(make_vec({1, 2}), 0.0));
  j["expr"]["w"][1] = "two";
  try {
    expr_from_json(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("w[1]") != std::string::npos);
  }
  CHECK_THROWS_AS(expr_from_json(json{{"schema_version", 2}}), SchemaError);
}

TEST_CASE("construction and evaluation errors") {
  CHECK_THROWS_AS(expr::scale(-1, expr::constant(1, 0)), InvalidArgument);
  Mat Q(1, 1);
  Q << -1;
  CHECK_THROWS_AS(expr::quad_form(Q, Vec::Zero(1), 0), InvalidArgument);
  CHECK_THROWS_AS(expr::sum({expr::constant(1, 0), expr::constant(2, 0)}), InvalidArgument);
  CHECK_THROWS_AS(evaluate(expr::constant(1, 0), make_vec({0}), 3), OrderError);
  CHECK_THROWS_AS(expr::gauss_ramp(make_vec({1}), 0, 0.0), InvalidArgument);
}

TEST_CASE("poly mollified |x| at the origin is within its error bound of theta(0)") {
  auto f = std::make_shared<const ConvexOracle>(family::abs_comp(Vec::Ones(1), 0.0));
  const Expr m = expr::mollified(f, 0.2, MollifierKernel::Poly, 64, 4);
  const Eval e = evaluate(m, make_vec({0.0}), 0);
  // the kink sits inside the support, so the rule is not exact there
  CHECK(std::abs(e.value - Theta::poly(0.2).value(0.0)) <= e.error_bound);
  CHECK(e.error_bound < 1e-3);
  CHECK(value(m, make_vec({0.5})) == Approx(0.5).margin(1e-12));  // |x| affine on the support
}
