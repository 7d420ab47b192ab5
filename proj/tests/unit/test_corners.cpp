#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "cvxglue/corners.hpp"

using namespace cvxglue;
using Catch::Approx;

namespace {

OraclePtr shared(ConvexOracle f) { return std::make_shared<const ConvexOracle>(std::move(f)); }

// Random (n+1)-corner; a generic draw is full-dimensional.
Corner random_corner(int n, Rng& rng) {
  Corner C{Mat(n + 1, n), Vec(n + 1)};
  for (int r = 0; r <= n; ++r) {
    C.L.row(r) = rng.uniform_box(Vec::Constant(n, -2), Vec::Constant(n, 2)).transpose();
    C.b(r) = rng.uniform(-1, 1);
  }
  return C;
}

}  // namespace

TEST_CASE("corner dimension on hand examples") {
  Mat L(2, 1);
  L << 1, -1;
  CHECK(corner_dimension(L) == 2);  // |x|
  L << 1, 1;
  CHECK(corner_dimension(L) == 1);  // parallel pieces: lifted rows coincide
  Mat L2(3, 2);
  L2 << 1, 0, -1, 0, 0, 0;
  CHECK(corner_dimension(L2) == 2);  // only depends on x_1
  L2 << 1, 0, 0, 1, 0, 0;
  CHECK(corner_dimension(L2) == 3);
}

TEST_CASE("canonical form reproduces the corner") {
  Rng rng(31);
  for (int n = 1; n <= 4; ++n) {
    const Corner C = random_corner(n, rng);
    REQUIRE(corner_dimension(C) == n + 1);
    const CanonicalCorner cc = canonicalize_corner(C);
    CHECK(cc.residual <= 1e-10);
    for (int i = 0; i < 200; ++i) {
      const Vec x = rng.uniform_box(Vec::Constant(n, -10), Vec::Constant(n, 10));
      CHECK(std::abs(cc(x) - C(x)) <= 1e-10 * (1 + std::abs(C(x))));
    }
  }
  Mat L(2, 1);
  L << 1, 1;
  CHECK_THROWS_AS(canonicalize_corner(Corner{L, make_vec({0, 1})}), InvalidArgument);
}

TEST_CASE("strongly convex corner approximant lies in [C, C + eps]") {
  Rng rng(32);
  for (int n = 1; n <= 3; ++n) {
    for (double eps : {0.5, 0.05}) {
      const Corner C = random_corner(n, rng);
      const Expr G = strongly_convex_corner_approx(C, eps);
      for (int i = 0; i < 2000; ++i) {
        const Vec x = rng.uniform_box(Vec::Constant(n, -3), Vec::Constant(n, 3));
        const double gap = value(G, x) - C(x);
        REQUIRE(gap >= -1e-12);
        REQUIRE(gap <= eps + 1e-12);
      }
    }
  }
}

TEST_CASE("gauss ramp curvature on a window matches the heat kernel minimum") {
  const double a = 0.5, h = 1e-3;
  const Expr r = expr::gauss_ramp(make_vec({1}), 0.0, a);
  double lo = kInf;
  for (int i = 0; i <= 600; ++i) {
    const double s = -3 + 6.0 * i / 600;
    const double d2 = (value(r, make_vec({s + h})) - 2 * value(r, make_vec({s})) + value(r, make_vec({s - h}))) / (h * h);
    lo = std::min(lo, d2);
  }
  const double closed = std::exp(-9 / (4 * a)) / std::sqrt(4 * std::numbers::pi * a);
  CHECK(lo == Approx(closed).epsilon(1e-3));
}

TEST_CASE("classifier separates full-rank and factorable functions") {
  const auto quartic = shared(family::pow_abs(Vec::Ones(1), 0.0, 4.0));
  CHECK(classify_strong_approx(quartic).kind == StrongApproxClass::Approximable);
  const auto bowl = shared(family::quadform(Mat::Identity(2, 2), Vec::Zero(2), 0.0));
  CHECK(classify_strong_approx(bowl).kind == StrongApproxClass::Approximable);

  const auto aff = shared(family::affine(make_vec({1, -2}), 0.5));
  const Classification ca = classify_strong_approx(aff);
  REQUIRE(ca.kind == StrongApproxClass::Factors);
  CHECK(ca.factorization->k == 0);

  // |x - y| + x = c(P x) + ell with P along (1, -1)
  const auto f = shared(family::sum({family::abs_comp(make_vec({1, -1}), 0.0), family::affine(make_vec({1, 0}), 0.0)}));
  const Classification cf = classify_strong_approx(f);
  REQUIRE(cf.kind == StrongApproxClass::Factors);
  const Factorization& fz = *cf.factorization;
  CHECK(fz.k == 1);
  CHECK(std::abs(std::abs(fz.witnesses.col(0).dot(make_vec({1, 1}))) / std::sqrt(2.0) - 1.0) <= 1e-8);
  CHECK(factorization_defect(*f, fz) <= 1e-6);
}

TEST_CASE("affine input is returned unchanged") {
  const auto aff = shared(family::affine(make_vec({1, -2}), 0.5));
  const StrongApproxResult r = strongly_convex_global_approx(aff, 0.1);
  CHECK(r.approximation.kind() == GlobalApproximation::Kind::Direct);
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const Vec x = rng.uniform_box(Vec::Constant(2, -20), Vec::Constant(2, 20));
    CHECK(r.approximation.value(x) == Approx(aff->value(x)).margin(1e-12));
  }
}

TEST_CASE("factorable corner: pullback sandwich and flat direction") {
  const double eps = 0.1;
  const auto f = shared(family::sum({family::abs_comp(make_vec({1, -1}), 0.0), family::affine(make_vec({1, 0}), 0.0)}));
  StrongApproxOptions opt;
  opt.stages = 6;
  const StrongApproxResult r = strongly_convex_global_approx(f, eps, opt);
  REQUIRE(r.approximation.kind() == GlobalApproximation::Kind::Pulled);
  Rng rng(34);
  const Vec u = make_vec({1, 1}) / std::sqrt(2.0);
  for (int i = 0; i < 300; ++i) {
    const Vec x = rng.uniform_ball(Vec::Zero(2), 3.0);
    const double gap = f->value(x) - r.approximation.value(x);
    CHECK(gap >= -1e-12);
    CHECK(gap <= eps + 1e-12);
    // g restricted to x + t u is affine: ker P is spanned by u
    const double h = 0.1;
    const double d2 =
        r.approximation.value(x + h * u) - 2 * r.approximation.value(x) + r.approximation.value(x - h * u);
    CHECK(std::abs(d2) <= 1e-8);
  }
  // the JSON form evaluates identically
  const GlobalApproximation back = GlobalApproximation::from_json(json::parse(r.approximation.to_json().dump()));
  const Vec x = make_vec({0.3, -0.4});
  CHECK(back.value(x) == r.approximation.value(x));
}

TEST_CASE("one-dimensional strongly convex approximation of |x|") {
  const double eps = 0.2;
  const auto f = shared(family::abs_comp(Vec::Ones(1), 0.0));
  StrongApproxOptions opt;
  opt.stages = 3;
  const StrongApproxResult r = strongly_convex_global_approx(f, eps, opt);
  REQUIRE(r.approximation.kind() == GlobalApproximation::Kind::Glued);
  for (int i = 0; i <= 200; ++i) {
    const Vec x = Vec::Constant(1, -2.5 + 5.0 * i / 200);
    const double gap = f->value(x) - r.approximation.value(x);
    CHECK(gap >= -1e-12);
    CHECK(gap <= eps + 1e-12);
  }
  // strictly convex near the kink, where the curvature is well above roundoff
  for (double x : {-0.01, 0.0, 0.01}) CHECK(r.approximation.evaluate(Vec::Constant(1, x), 2).hessian(0, 0) > 1.0);
}
