#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "cvxglue/types.hpp"

namespace cvxglue::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
inline std::pair<double, double> legendre_pair(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

/// Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline Rule gauss_legendre(int n) {
  if (n < 1) throw InvalidArgument("gauss_legendre: need at least one node");
  Rule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  if (n == 1) {
    r.weights[0] = 2.0;
    return r;
  }
  for (int i = 0; i < n / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pm] = legendre_pair(n, x);
      const double dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre_pair(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    const auto [pn, pm] = legendre_pair(n, 0.0);
    (void)pn;
    const double dp = n * (-pm) / (-1.0);
    r.weights[n / 2] = 2.0 / (dp * dp);
  }
  return r;
}

/// Gauss-Hermite rule for the standard normal density (Golub-Welsch).
/// Weights sum to one, so sum_i w_i g(z_i) approximates E[g(Z)], Z ~ N(0,1).
inline Rule gauss_hermite_normal(int n) {
  if (n < 1) throw InvalidArgument("gauss_hermite_normal: need at least one node");
  Mat jacobi = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    jacobi(i, i - 1) = std::sqrt(static_cast<double>(i));
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    r.weights[i] = v0 * v0;
  }
  // Symmetrize against eigen-solver noise.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (r.nodes[n - 1 - i] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[n - 1 - i]);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

}  // namespace cvxglue::quadrature
