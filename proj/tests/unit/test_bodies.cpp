#include <catch_amalgamated.hpp>

#include <cmath>

#include "cvxglue/bodies.hpp"

using namespace cvxglue;
using Catch::Approx;

namespace {

// Projection onto {A x <= b} by enumerating active sets: for each subset S,
// project onto {A_S x = b_S}; keep the nearest feasible result.
Vec project_by_enumeration(const Mat& A, const Vec& b, const Vec& x) {
  const int m = static_cast<int>(A.rows());
  Vec best;
  double best_d = kInf;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask >> i & 1) idx.push_back(i);
    Vec y = x;
    if (!idx.empty()) {
      Mat As(idx.size(), A.cols());
      Vec bs(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) As.row(k) = A.row(idx[k]), bs(k) = b(idx[k]);
      const Vec lam = (As * As.transpose()).completeOrthogonalDecomposition().solve(As * x - bs);
      y = x - As.transpose() * lam;
      if ((As * y - bs).cwiseAbs().maxCoeff() > 1e-9) continue;  // inconsistent equalities
    }
    if ((A * y - b).maxCoeff() > 1e-10) continue;
    const double d = (y - x).norm();
    if (d < best_d) best_d = d, best = y;
  }
  return best;
}

// Dykstra's alternating projections onto a polytope and a ball, run long.
Vec project_by_dykstra(const Body& P, const Vec& c, double r, const Vec& x) {
  Vec y = x, p = Vec::Zero(x.size()), q = Vec::Zero(x.size());
  for (int it = 0; it < 20000; ++it) {
    const Vec u = P.project(y + p);
    p = y + p - u;
    const Vec v = u + q - c;
    const Vec w = v.norm() > r ? Vec(c + r * v / v.norm()) : Vec(u + q);
    q = u + q - w;
    y = w;
  }
  return y;
}

}  // namespace

TEST_CASE("polytope projection agrees with active-set enumeration") {
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 2, m = 4 + trial % 3;
    Mat A(m, n);
    for (int i = 0; i < m; ++i) A.row(i) = rng.direction(n).transpose();
    const Vec b = rng.uniform_box(Vec::Constant(m, 0.2), Vec::Constant(m, 1.0));  // contains 0
    const Body P = Body::polytope(A, b);
    for (int k = 0; k < 10; ++k) {
      const Vec x = rng.uniform_box(Vec::Constant(n, -4), Vec::Constant(n, 4));
      const Vec want = project_by_enumeration(A, b, x);
      CHECK((P.project(x) - want).norm() <= 1e-8);
    }
  }
}

TEST_CASE("intersection projection agrees with Dykstra") {
  Mat A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  const Body P = Body::polytope(A, Vec::Ones(4));
  const Vec c = make_vec({0.3, 0.1});
  const double r = 1.2;
  const Body C = Body::intersection(P, Body::ball(c, r));
  Rng rng(42);
  for (int k = 0; k < 25; ++k) {
    const Vec x = rng.uniform_box(Vec::Constant(2, -3), Vec::Constant(2, 3));
    const Vec want = project_by_dykstra(P, c, r, x);
    CHECK((C.project(x) - want).norm() <= 1e-6);
    CHECK(C.contains(C.project(x), 1e-9));
  }
}

TEST_CASE("distance to a half-plane and to a ball") {
  Mat A(1, 2);
  A << 0, 1;
  const Body H = Body::polytope(A, Vec::Constant(1, 0.5));  // y <= 0.5
  const ConvexOracle d = distance_oracle(H);
  for (double y : {-1.0, 0.5, 0.7, 3.0}) CHECK(d.value(make_vec({2.0, y})) == Approx(std::max(0.0, y - 0.5)).margin(1e-12));
  CHECK((d.subgradient(make_vec({1.0, 2.0})) - make_vec({0, 1})).norm() <= 1e-12);
  const Body B = Body::ball(make_vec({1, 1}), 2.0);
  CHECK(B.distance(make_vec({4, 5})) == Approx(3.0));
  CHECK(B.distance(make_vec({1, 2})) == 0.0);
  CHECK_THROWS_AS(Body::ball(make_vec({0, 0}), -1.0), InvalidArgument);
}

TEST_CASE("smoothed half-plane: level set stays between C and C + eps") {
  Mat A(1, 2);
  A << 0, 1;
  const Body H = Body::polytope(A, Vec::Constant(1, 0.0));
  const double eps = 0.2;
  const SmoothBody D = smooth_body(H, eps, {.stages = 4});
  // the boundary {g = 0} along a vertical line sits at height y* in [0, eps]; by
  // the construction f - 2 eps/3 <= g <= f - eps/3 it lies in [eps/3, 2 eps/3]
  for (double x : {-2.0, 0.0, 1.5}) {
    double lo = 0, hi = eps;
    REQUIRE(D.value(make_vec({x, lo})) <= 0.0);
    REQUIRE(D.value(make_vec({x, hi})) > 0.0);
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (D.value(make_vec({x, mid})) <= 0.0 ? lo : hi) = mid;
    }
    CHECK(lo >= eps / 3 - 1e-9);
    CHECK(lo <= 2 * eps / 3 + 1e-9);
  }
  const VerifyReport rep = check_body(D, Region::box(Vec::Constant(2, -2), Vec::Constant(2, 2)), 2000);
  CHECK(rep.pass());
}

TEST_CASE("smoothed disc passes the body checks") {
  const SmoothBody D = smooth_body(Body::ball(Vec::Zero(2), 1.0), 0.1, {.stages = 4});
  const VerifyReport rep = check_body(D, Region::box(Vec::Constant(2, -2), Vec::Constant(2, 2)), 3000);
  CHECK(rep.pass());
  CHECK(rep.checks[2].metric == Approx(1.0).margin(0.05));  // |grad dist| = 1 off C
}

TEST_CASE("empty bodies are rejected") {
  Mat A(2, 1);
  A << 1, -1;
  const Body P = Body::polytope(A, make_vec({-1, -1}));  // x <= -1 and x >= 1
  CHECK_THROWS(smooth_body(P, 0.1));
}

TEST_CASE("epigraph of x^2 has no uniform graph approximation") {
  const DemoReport r = epigraph_demo(0.1);
  CHECK(r.pass);
  CHECK(r.quantity > 10);
  // oracle: the eps/2-neighbourhood boundary is about (eps/2) sqrt(1 + 4 x^2) below x^2
  const auto rows = r.details["rows"];
  REQUIRE(rows.size() == 4);
  const double x = rows[3]["x"].get<double>(), gap = rows[3]["gap"].get<double>();
  CHECK(gap == Approx(0.05 * std::sqrt(1 + 4 * x * x)).epsilon(1e-3));
}
