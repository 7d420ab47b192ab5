#pragma once

#include <vector>

#include "cvxglue/expr.hpp"
#include "cvxglue/theta.hpp"

namespace cvxglue {

inline Theta theta_poly(double epsilon, int k = 4) { return Theta::poly(epsilon, k); }
inline Theta theta_gauss(double epsilon) { return Theta::gauss(epsilon); }

/// M(f, g) = (f + g + theta(f - g)) / 2.
///
/// With the Gauss backend this is the modified maximum: it never equals the
/// plain max, but M(f, g) > max(f, g) and strong convexity is preserved.
inline Expr smooth_max(const Expr& f, const Expr& g, const Theta& theta) {
  return expr::smooth_max_node(f, g, theta);
}

/// M(p_1, M(p_2, ..., M(p_{m-1}, p_m))), associating right to left.
/// max_j p_j <= N <= max_j p_j + (m - 1) eps / 2.
inline Expr nested_smooth_max(std::vector<Expr> pieces, const Theta& theta) {
  if (pieces.empty()) throw InvalidArgument("nested_smooth_max: empty piece list");
  if (pieces.size() == 1) return pieces.front();
  if (pieces.size() == 2) return smooth_max(pieces[0], pieces[1], theta);
  return expr::nested_smooth_max_node(std::move(pieces), theta);
}

}  // namespace cvxglue
