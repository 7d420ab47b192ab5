#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "cvxglue/oracle.hpp"
#include "cvxglue/quadrature.hpp"
#include "cvxglue/theta.hpp"
#include "cvxglue/types.hpp"

namespace cvxglue {

struct Node;

/// Immutable closed-form convex function on R^n. Copies share the tree.
class Expr {
 public:
  Expr() = default;
  Expr(std::shared_ptr<const Node> node, int dim) : node_(std::move(node)), dim_(dim) {}

  int dim() const { return dim_; }
  const Node& node() const { return *node_; }
  const std::shared_ptr<const Node>& node_ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<const Node> node_;
  int dim_ = 0;
};

enum class MollifierKernel { Poly, Gauss };

/// <w, x> + b
struct AffineNode {
  Vec w;
  double b = 0.0;
};

/// max_j (<W_j, x> + b_j), pieces stored as rows of W.
struct MaxOfAffineNode {
  Mat W;
  Vec b;
};

/// (l + r + theta(l - r)) / 2
struct SmoothMaxNode {
  Expr left, right;
  Theta theta;
};

/// M(p_1, M(p_2, ... M(p_{m-1}, p_m))) with one theta, evaluated iteratively.
struct NestedSmoothMaxNode {
  std::vector<Expr> pieces;
  Theta theta;
  // Dense copy of the pieces when all of them are affine.
  bool all_affine = false;
  Mat W;
  Vec b;
};

/// Heat-kernel smoothing of t -> max{t, 0}, applied to s = <w, x> + b:
/// ramp(s) = (s + (|.| * H_a)(s)) / 2, ramp'' = H_a.
struct GaussRampNode {
  Vec w;
  double b = 0.0;
  double variance = 1.0;
};

/// inner(A x + c)
struct AffinePrecomposeNode {
  Mat A;
  Vec c;
  Expr inner;
};

/// inner(P x) + <ell_w, x> + ell_b with inner on R^k.
struct PullbackNode {
  Mat P;
  Vec ell_w;
  double ell_b = 0.0;
  Expr inner;
};

struct SumNode {
  std::vector<Expr> terms;
};

struct NonNegScaleNode {
  double lambda = 1.0;
  Expr inner;
};

/// scale * exp(<w, x> + b), scale >= 0.
struct ExpAffineNode {
  Vec w;
  double b = 0.0;
  double scale = 1.0;
};

/// x^T Q x + <w, x> + b with Q symmetric PSD.
struct QuadFormNode {
  Mat Q;
  Vec w;
  double b = 0.0;
};

/// x -> integral f(x - y) delta(y) dy by tensor quadrature.
struct MollifiedOracleNode {
  OraclePtr oracle;
  double radius = 0.1;
  MollifierKernel kernel = MollifierKernel::Poly;
  int nodes_per_axis = 32;
  int poly_k = 4;
  // Unit-scale 1-D rules with the kernel density folded into the weights.
  std::vector<double> nodes, weights, coarse_nodes, coarse_weights;
  // d/dv log(kernel) at each node, for the Hessian.
  std::vector<double> score;
};

struct Node {
  std::variant<AffineNode, MaxOfAffineNode, SmoothMaxNode, NestedSmoothMaxNode, GaussRampNode,
               AffinePrecomposeNode, PullbackNode, SumNode, NonNegScaleNode, QuadFormNode,
               MollifiedOracleNode, ExpAffineNode>
      v;
};

/// Result of evaluate(); gradient/hessian are empty below the requested order.
struct Eval {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
  int order = 0;
  /// Set when a derivative was taken at a MaxOfAffine tie.
  bool nonsmooth = false;
  /// Quadrature error estimate (MollifiedOracle nodes), 0 otherwise.
  double error_bound = 0.0;
};

namespace detail {

inline void require(bool ok, const char* msg) {
  if (!ok) throw InvalidArgument(msg);
}

template <class T>
Expr make(T node, int dim) {
  return Expr(std::make_shared<const Node>(Node{std::move(node)}), dim);
}

}  // namespace detail

namespace expr {

inline Expr affine(const Vec& w, double b) {
  detail::require(w.size() >= 1, "affine: empty coefficient vector");
  return detail::make(AffineNode{w, b}, static_cast<int>(w.size()));
}

inline Expr constant(int n, double c) { return affine(Vec::Zero(n), c); }

inline Expr max_of_affine(const Mat& W, const Vec& b) {
  detail::require(W.rows() >= 1 && W.rows() == b.size(), "max_of_affine: need matching nonempty pieces");
  return detail::make(MaxOfAffineNode{W, b}, static_cast<int>(W.cols()));
}

inline Expr smooth_max_node(const Expr& l, const Expr& r, const Theta& theta) {
  detail::require(l && r, "smooth_max: null operand");
  if (l.dim() != r.dim()) throw InvalidArgument("smooth_max: operands live on different domains");
  return detail::make(SmoothMaxNode{l, r, theta}, l.dim());
}

inline Expr nested_smooth_max_node(std::vector<Expr> pieces, const Theta& theta) {
  detail::require(!pieces.empty(), "nested_smooth_max: empty piece list");
  const int n = pieces.front().dim();
  for (const auto& p : pieces)
    if (!p || p.dim() != n) throw InvalidArgument("nested_smooth_max: pieces live on different domains");
  NestedSmoothMaxNode node{std::move(pieces), theta};
  node.all_affine = true;
  for (const auto& p : node.pieces) node.all_affine &= std::holds_alternative<AffineNode>(p.node().v);
  if (node.all_affine) {
    node.W.resize(node.pieces.size(), n);
    node.b.resize(node.pieces.size());
    for (std::size_t j = 0; j < node.pieces.size(); ++j) {
      const auto& a = std::get<AffineNode>(node.pieces[j].node().v);
      node.W.row(j) = a.w.transpose();
      node.b(j) = a.b;
    }
  }
  return detail::make(std::move(node), n);
}

inline Expr gauss_ramp(const Vec& w, double b, double variance) {
  detail::require(variance > 0.0, "gauss_ramp: variance must be positive");
  return detail::make(GaussRampNode{w, b, variance}, static_cast<int>(w.size()));
}

inline Expr affine_precompose(const Mat& A, const Vec& c, const Expr& inner) {
  detail::require(static_cast<bool>(inner), "affine_precompose: null inner");
  if (A.rows() != inner.dim() || c.size() != A.rows())
    throw InvalidArgument("affine_precompose: A must map into the inner domain");
  return detail::make(AffinePrecomposeNode{A, c, inner}, static_cast<int>(A.cols()));
}

inline Expr pullback(const Mat& P, const Vec& ell_w, double ell_b, const Expr& inner) {
  detail::require(static_cast<bool>(inner), "pullback: null inner");
  if (P.rows() != inner.dim() || P.cols() != ell_w.size())
    throw InvalidArgument("pullback: P must be k x n with inner on R^k");
  return detail::make(PullbackNode{P, ell_w, ell_b, inner}, static_cast<int>(P.cols()));
}

inline Expr sum(std::vector<Expr> terms) {
  detail::require(!terms.empty(), "sum: no terms");
  const int n = terms.front().dim();
  for (const auto& t : terms)
    if (!t || t.dim() != n) throw InvalidArgument("sum: terms live on different domains");
  if (terms.size() == 1) return terms.front();
  return detail::make(SumNode{std::move(terms)}, n);
}

inline Expr scale(double lambda, const Expr& inner) {
  if (!(lambda >= 0.0)) throw InvalidArgument("scale: negative factor would break convexity");
  return detail::make(NonNegScaleNode{lambda, inner}, inner.dim());
}

inline Expr quad_form(const Mat& Q, const Vec& w, double b) {
  if (Q.rows() != Q.cols() || Q.rows() != w.size()) throw InvalidArgument("quad_form: dimension mismatch");
  const double tol = 1e-12 * (1.0 + Q.norm());
  if ((Q - Q.transpose()).norm() > tol) throw InvalidArgument("quad_form: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  if (es.eigenvalues().minCoeff() < -tol) throw InvalidArgument("quad_form: Q must be positive semidefinite");
  return detail::make(QuadFormNode{Q, w, b}, static_cast<int>(w.size()));
}

inline Expr exp_affine(const Vec& w, double b, double scale = 1.0) {
  if (!(scale >= 0.0)) throw InvalidArgument("exp_affine: negative scale would break convexity");
  return detail::make(ExpAffineNode{w, b, scale}, static_cast<int>(w.size()));
}

/// e + c as a Sum with a constant term.
inline Expr shifted(const Expr& e, double c) {
  if (c == 0.0) return e;
  return sum({e, constant(e.dim(), c)});
}

inline Expr mollified(OraclePtr oracle, double radius, MollifierKernel kernel = MollifierKernel::Poly,
                      int nodes_per_axis = 32, int poly_k = 4) {
  detail::require(static_cast<bool>(oracle), "mollify: null oracle");
  detail::require(radius > 0.0, "mollify: radius must be positive");
  detail::require(nodes_per_axis >= 2, "mollify: need at least two nodes per axis");
  const int n = oracle->dim();
  if (n > 3) throw InvalidArgument("mollify: grid quadrature supports dimension <= 3");
  MollifiedOracleNode m;
  m.oracle = oracle;
  m.radius = radius;
  m.kernel = kernel;
  m.nodes_per_axis = nodes_per_axis;
  m.poly_k = poly_k;
  auto fold = [&](int count, std::vector<double>& nodes, std::vector<double>& weights, std::vector<double>* score) {
    if (kernel == MollifierKernel::Poly) {
      const Theta unit = Theta::poly(1.0, poly_k);
      const auto rule = quadrature::gauss_legendre(count);
      nodes = rule.nodes;
      weights.resize(count);
      for (int i = 0; i < count; ++i) weights[i] = rule.weights[i] * unit.mollifier(rule.nodes[i]);
      if (score) {
        score->resize(count);
        for (int i = 0; i < count; ++i) {
          const double v = rule.nodes[i];
          (*score)[i] = -2.0 * poly_k * v / (1.0 - v * v);
        }
      }
    } else {
      const auto rule = quadrature::gauss_hermite_normal(count);
      nodes = rule.nodes;
      weights = rule.weights;
      if (score) {
        score->resize(count);
        for (int i = 0; i < count; ++i) (*score)[i] = -rule.nodes[i];
      }
    }
  };
  fold(nodes_per_axis, m.nodes, m.weights, &m.score);
  fold(std::max(2, nodes_per_axis / 2), m.coarse_nodes, m.coarse_weights, nullptr);
  return detail::make(std::move(m), n);
}

}  // namespace expr

namespace detail {

inline double ramp_excess(double s, double variance) {
  // (|.| * H_a)(s) - |s| = 2 sqrt(a) (exp(-z^2)/sqrt(pi) - z erfc(z)), z = |s| / (2 sqrt(a)).
  const double sa = 2.0 * std::sqrt(variance);
  const double z = std::abs(s) / sa;
  const double tail = std::exp(-z * z) / std::sqrt(std::numbers::pi) - z * std::erfc(z);
  return sa * std::max(tail, 0.0);
}

inline double ramp_value(double s, double variance) { return std::max(s, 0.0) + 0.5 * ramp_excess(s, variance); }
inline double ramp_d1(double s, double variance) { return 0.5 * std::erfc(-s / (2.0 * std::sqrt(variance))); }
inline double ramp_d2(double s, double variance) {
  return std::exp(-s * s / (4.0 * variance)) / std::sqrt(4.0 * std::numbers::pi * variance);
}

inline void check_order(int order) {
  if (order < 0 || order > 2) throw OrderError("evaluate: only orders 0, 1 and 2 are supported");
}

template <class F>
void for_each_grid_point(int n, int count, F&& f) {
  std::vector<int> idx(n, 0);
  while (true) {
    f(idx);
    int d = 0;
    while (d < n && ++idx[d] == count) idx[d++] = 0;
    if (d == n) break;
  }
}

inline void check_mollifier_domain(const MollifiedOracleNode& m, const Vec& x) {
  const DomainU& U = m.oracle->domain;
  if (m.kernel == MollifierKernel::Gauss) {
    if (!U.is_all_space()) throw DomainError("mollify: Gaussian kernel requires the oracle on all of R^n");
    return;
  }
  if (U.is_all_space()) return;
  const double reach = m.radius * std::sqrt(static_cast<double>(x.size()));
  if (!(U.signed_margin(x) > reach)) throw DomainError("mollify: query too close to the domain boundary");
}

inline double mollified_sum(const MollifiedOracleNode& m, const Vec& x, const std::vector<double>& nodes,
                            const std::vector<double>& weights) {
  const int n = static_cast<int>(x.size());
  const double scale = m.radius;
  double acc = 0.0;
  Vec y(n);
  for_each_grid_point(n, static_cast<int>(nodes.size()), [&](const std::vector<int>& idx) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      y(i) = x(i) - scale * nodes[idx[i]];
      w *= weights[idx[i]];
    }
    acc += w * m.oracle->value(y);
  });
  return acc;
}

double value_of(const Node& node, const Vec& x);
void eval_node(const Node& node, const Vec& x, int order, Eval& out);

struct ValueVisitor {
  const Vec& x;

  double operator()(const AffineNode& a) const { return a.w.dot(x) + a.b; }
  double operator()(const MaxOfAffineNode& m) const { return (m.W * x + m.b).maxCoeff(); }
  double operator()(const SmoothMaxNode& s) const {
    return smooth_max_value(value_of(s.left.node(), x), value_of(s.right.node(), x), s.theta);
  }
  double operator()(const NestedSmoothMaxNode& s) const {
    if (s.all_affine) {
      const Vec v = s.W * x + s.b;
      double acc = v(v.size() - 1);
      for (Eigen::Index j = v.size() - 1; j-- > 0;) acc = smooth_max_value(v(j), acc, s.theta);
      return acc;
    }
    double acc = value_of(s.pieces.back().node(), x);
    for (std::size_t j = s.pieces.size() - 1; j-- > 0;)
      acc = smooth_max_value(value_of(s.pieces[j].node(), x), acc, s.theta);
    return acc;
  }
  double operator()(const GaussRampNode& g) const { return ramp_value(g.w.dot(x) + g.b, g.variance); }
  double operator()(const AffinePrecomposeNode& a) const {
    const Vec y = a.A * x + a.c;
    return value_of(a.inner.node(), y);
  }
  double operator()(const PullbackNode& p) const {
    const Vec z = p.P * x;
    return value_of(p.inner.node(), z) + p.ell_w.dot(x) + p.ell_b;
  }
  double operator()(const SumNode& s) const {
    double acc = 0.0;
    for (const auto& t : s.terms) acc += value_of(t.node(), x);
    return acc;
  }
  double operator()(const NonNegScaleNode& s) const { return s.lambda * value_of(s.inner.node(), x); }
  double operator()(const QuadFormNode& q) const { return x.dot(q.Q * x) + q.w.dot(x) + q.b; }
  double operator()(const MollifiedOracleNode& m) const {
    check_mollifier_domain(m, x);
    return mollified_sum(m, x, m.nodes, m.weights);
  }
  double operator()(const ExpAffineNode& e) const { return e.scale * std::exp(e.w.dot(x) + e.b); }
};

inline double value_of(const Node& node, const Vec& x) { return std::visit(ValueVisitor{x}, node.v); }

/// out <- M(left, right) given both operands' evaluations.
inline void combine_smooth_max(const Eval& l, const Eval& r, const Theta& theta, int order, Eval& out) {
  const double t = l.value - r.value;
  out.nonsmooth = l.nonsmooth || r.nonsmooth;
  out.error_bound = std::max(l.error_bound, r.error_bound);
  out.order = order;
  if (theta.backend() == ThetaBackend::Poly && std::abs(t) >= theta.epsilon()) {
    const Eval& w = t > 0 ? l : r;
    out.value = w.value;
    if (order >= 1) out.gradient = w.gradient;
    if (order >= 2) out.hessian = w.hessian;
    return;
  }
  out.value = std::max(l.value, r.value) + 0.5 * theta.excess(t);
  if (order == 0) return;
  const double d1 = theta.d1(t);
  const double wl = 0.5 * (1.0 + d1), wr = 0.5 * (1.0 - d1);
  const Vec diff = l.gradient - r.gradient;
  out.gradient = wl * l.gradient + wr * r.gradient;
  if (order == 2) out.hessian = wl * l.hessian + wr * r.hessian + 0.5 * theta.d2(t) * diff * diff.transpose();
}

struct EvalVisitor {
  const Vec& x;
  int order;
  Eval& out;

  void set_affine(const Vec& w, double v) const {
    out.value = v;
    if (order >= 1) out.gradient = w;
    if (order >= 2) out.hessian = Mat::Zero(x.size(), x.size());
  }

  void operator()(const AffineNode& a) const { set_affine(a.w, a.w.dot(x) + a.b); }

  void operator()(const MaxOfAffineNode& m) const {
    const Vec vals = m.W * x + m.b;
    Eigen::Index j;
    const double vmax = vals.maxCoeff(&j);  // first maximal index
    if (order >= 1) {
      const double tol = 1e-12 * std::max(1.0, std::abs(vmax));
      for (Eigen::Index i = 0; i < vals.size(); ++i)
        if (i != j && std::abs(vals(i) - vmax) <= tol && (m.W.row(i) - m.W.row(j)).norm() > 0) out.nonsmooth = true;
    }
    set_affine(m.W.row(j).transpose(), vmax);
  }

  void operator()(const SmoothMaxNode& s) const {
    Eval l, r;
    eval_node(s.left.node(), x, order, l);
    eval_node(s.right.node(), x, order, r);
    combine_smooth_max(l, r, s.theta, order, out);
  }

  void operator()(const NestedSmoothMaxNode& s) const {
    if (s.all_affine) return affine_fold(s);
    Eval acc;
    eval_node(s.pieces.back().node(), x, order, acc);
    for (std::size_t j = s.pieces.size() - 1; j-- > 0;) {
      Eval p, next;
      eval_node(s.pieces[j].node(), x, order, p);
      combine_smooth_max(p, acc, s.theta, order, next);
      acc = std::move(next);
    }
    out = std::move(acc);
  }

  // Right-to-left fold over dense affine pieces without per-piece allocation.
  void affine_fold(const NestedSmoothMaxNode& s) const {
    const auto n = x.size();
    const Vec v = s.W * x + s.b;
    const Eigen::Index m = v.size();
    double acc = v(m - 1);
    Vec g = s.W.row(m - 1).transpose();
    Mat H = Mat::Zero(order >= 2 ? n : 0, order >= 2 ? n : 0);
    Vec diff(n);
    const bool poly = s.theta.backend() == ThetaBackend::Poly;
    const double eps = s.theta.epsilon();
    for (Eigen::Index j = m - 1; j-- > 0;) {
      const double t = v(j) - acc;
      if (poly && std::abs(t) >= eps) {
        if (t > 0) {
          acc = v(j);
          if (order >= 1) g = s.W.row(j).transpose();
          if (order >= 2) H.setZero();
        }
        continue;
      }
      const double next = std::max(v(j), acc) + 0.5 * s.theta.excess(t);
      if (order >= 1) {
        const double d1 = s.theta.d1(t);
        const double wl = 0.5 * (1.0 + d1), wr = 0.5 * (1.0 - d1);
        diff = s.W.row(j).transpose() - g;
        if (order >= 2) {
          H *= wr;
          H.noalias() += 0.5 * s.theta.d2(t) * diff * diff.transpose();
        }
        g = wl * s.W.row(j).transpose() + wr * g;
      }
      acc = next;
    }
    out.value = acc;
    if (order >= 1) out.gradient = g;
    if (order >= 2) out.hessian = H;
  }

  void operator()(const GaussRampNode& g) const {
    const double s = g.w.dot(x) + g.b;
    out.value = ramp_value(s, g.variance);
    if (order >= 1) out.gradient = ramp_d1(s, g.variance) * g.w;
    if (order >= 2) out.hessian = ramp_d2(s, g.variance) * g.w * g.w.transpose();
  }

  void operator()(const AffinePrecomposeNode& a) const {
    const Vec y = a.A * x + a.c;
    Eval in;
    eval_node(a.inner.node(), y, order, in);
    out.value = in.value;
    out.nonsmooth = in.nonsmooth;
    out.error_bound = in.error_bound;
    if (order >= 1) out.gradient = a.A.transpose() * in.gradient;
    if (order >= 2) out.hessian = a.A.transpose() * in.hessian * a.A;
  }

  void operator()(const PullbackNode& p) const {
    const Vec z = p.P * x;
    Eval in;
    eval_node(p.inner.node(), z, order, in);
    out.value = in.value + p.ell_w.dot(x) + p.ell_b;
    out.nonsmooth = in.nonsmooth;
    out.error_bound = in.error_bound;
    if (order >= 1) out.gradient = p.P.transpose() * in.gradient + p.ell_w;
    if (order >= 2) out.hessian = p.P.transpose() * in.hessian * p.P;
  }

  void operator()(const SumNode& s) const {
    const auto n = x.size();
    out.value = 0.0;
    if (order >= 1) out.gradient = Vec::Zero(n);
    if (order >= 2) out.hessian = Mat::Zero(n, n);
    for (const auto& t : s.terms) {
      Eval e;
      eval_node(t.node(), x, order, e);
      out.value += e.value;
      out.nonsmooth |= e.nonsmooth;
      out.error_bound += e.error_bound;
      if (order >= 1) out.gradient += e.gradient;
      if (order >= 2) out.hessian += e.hessian;
    }
  }

  void operator()(const NonNegScaleNode& s) const {
    eval_node(s.inner.node(), x, order, out);
    out.value *= s.lambda;
    out.error_bound *= s.lambda;
    if (order >= 1) out.gradient *= s.lambda;
    if (order >= 2) out.hessian *= s.lambda;
  }

  void operator()(const QuadFormNode& q) const {
    out.value = x.dot(q.Q * x) + q.w.dot(x) + q.b;
    if (order >= 1) out.gradient = 2.0 * q.Q * x + q.w;
    if (order >= 2) out.hessian = 2.0 * q.Q;
  }

  void operator()(const ExpAffineNode& e) const {
    const double v = e.scale * std::exp(e.w.dot(x) + e.b);
    out.value = v;
    if (order >= 1) out.gradient = v * e.w;
    if (order >= 2) out.hessian = v * e.w * e.w.transpose();
  }

  void operator()(const MollifiedOracleNode& m) const {
    check_mollifier_domain(m, x);
    out.value = mollified_sum(m, x, m.nodes, m.weights);
    out.error_bound = std::abs(out.value - mollified_sum(m, x, m.coarse_nodes, m.coarse_weights));
    if (order == 0) return;
    if (!m.oracle->has_subgradient())
      throw OrderError("mollify: derivatives need a subgradient oracle");
    const int n = static_cast<int>(x.size());
    Vec grad = Vec::Zero(n);
    Mat hess = Mat::Zero(n, n);
    Vec y(n), score(n);
    for_each_grid_point(n, static_cast<int>(m.nodes.size()), [&](const std::vector<int>& idx) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        y(i) = x(i) - m.radius * m.nodes[idx[i]];
        w *= m.weights[idx[i]];
        score(i) = m.score[idx[i]] / m.radius;
      }
      const Vec g = m.oracle->subgradient(y);
      grad += w * g;
      // d^2/dx_i dx_j f_eps = integral d_i f(x - y) d_j delta(y) dy.
      if (order >= 2) hess += w * g * score.transpose();
    });
    out.gradient = grad;
    if (order >= 2) out.hessian = 0.5 * (hess + hess.transpose());
  }
};

inline void eval_node(const Node& node, const Vec& x, int order, Eval& out) {
  std::visit(EvalVisitor{x, order, out}, node.v);
  out.order = order;
}

}  // namespace detail

/// Value and derivatives up to `order` (0, 1 or 2) at x.
inline Eval evaluate(const Expr& e, const Vec& x, int order = 0) {
  detail::check_order(order);
  if (!e) throw InvalidArgument("evaluate: null expression");
  if (x.size() != e.dim()) throw DomainError("evaluate: point has the wrong dimension");
  Eval out;
  detail::eval_node(e.node(), x, order, out);
  return out;
}

/// Order-0 evaluation without derivative bookkeeping.
inline double value(const Expr& e, const Vec& x) {
  if (x.size() != e.dim()) throw DomainError("evaluate: point has the wrong dimension");
  return detail::value_of(e.node(), x);
}

inline std::string kind_name(const Node& n) {
  static const char* names[] = {"affine",         "max_of_affine", "smooth_max", "nested_smooth_max",
                                "gauss_ramp",     "affine_precompose", "pullback", "sum",
                                "nonneg_scale",   "quad_form",     "mollified_oracle", "exp_affine"};
  return names[n.v.index()];
}

/// Number of nodes reachable from e (shared subtrees counted once per path).
inline std::size_t node_count(const Expr& e) {
  std::size_t count = 0;
  std::vector<const Node*> stack{&e.node()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    ++count;
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, SmoothMaxNode>) {
            stack.push_back(&node.left.node());
            stack.push_back(&node.right.node());
          } else if constexpr (std::is_same_v<T, NestedSmoothMaxNode>) {
            for (const auto& p : node.pieces) stack.push_back(&p.node());
          } else if constexpr (std::is_same_v<T, SumNode>) {
            for (const auto& p : node.terms) stack.push_back(&p.node());
          } else if constexpr (std::is_same_v<T, AffinePrecomposeNode> || std::is_same_v<T, PullbackNode> ||
                               std::is_same_v<T, NonNegScaleNode>) {
            stack.push_back(&node.inner.node());
          }
        },
        n->v);
  }
  return count;
}

}  // namespace cvxglue
