#pragma once

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cvxglue/domain.hpp"
#include "cvxglue/expr.hpp"
#include "cvxglue/expr_json.hpp"
#include "cvxglue/glue.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/regularize.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/smoothmax.hpp"

namespace cvxglue {

/// max_j (<l_j, x> + b_j) with the l_j stored as rows.
struct Corner {
  Mat L;
  Vec b;

  int dim() const { return static_cast<int>(L.cols()); }
  int pieces() const { return static_cast<int>(L.rows()); }
  double operator()(const Vec& x) const { return (L * x + b).maxCoeff(); }
};

/// Rows (-l_j, 1) of the lifted forms x_{n+1} - l_j(x).
inline Mat lifted_forms(const Mat& L) {
  Mat M(L.rows(), L.cols() + 1);
  M.leftCols(L.cols()) = -L;
  M.col(L.cols()).setOnes();
  return M;
}

inline int numerical_rank(const Mat& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

/// Rank of the lifted forms with threshold sigma_max * 1e-10 * max(k, n + 1).
inline int corner_dimension(const Mat& L) {
  if (L.rows() < 1) throw InvalidArgument("corner_dimension: need at least one piece");
  const double tol = 1e-10 * static_cast<double>(std::max<Eigen::Index>(L.rows(), L.cols() + 1));
  return numerical_rank(lifted_forms(L), tol);
}

inline int corner_dimension(const Corner& c) { return corner_dimension(c.L); }

/// C = q + max{0, (A x + c)_1, ..., (A x + c)_n}.
struct CanonicalCorner {
  Vec q_w;
  double q_b = 0.0;
  Mat A;
  Vec c;
  /// Sampled max |C - canonical form| over random points.
  double residual = 0.0;

  double operator()(const Vec& x) const {
    const Vec y = A * x + c;
    return q_w.dot(x) + q_b + std::max(0.0, y.maxCoeff());
  }
};

inline CanonicalCorner canonicalize_corner(const Corner& C, std::uint64_t seed = 5) {
  const int n = C.dim();
  if (C.pieces() != n + 1 || corner_dimension(C) != n + 1)
    throw InvalidArgument("canonicalize_corner: need an (n+1)-dimensional corner on R^n");
  CanonicalCorner out;
  out.q_w = C.L.row(0).transpose();
  out.q_b = C.b(0);
  out.A = C.L.bottomRows(n).rowwise() - C.L.row(0);
  out.c = (C.b.tail(n).array() - C.b(0)).matrix();
  Rng rng(seed);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = rng.uniform_box(Vec::Constant(n, -100.0), Vec::Constant(n, 100.0));
    const double ref = C(x);
    out.residual = std::max(out.residual, std::abs(ref - out(x)) / (1.0 + std::abs(ref)));
  }
  return out;
}

/// C^inf strongly convex G with C <= G <= C + epsilon on R^n.
///
/// On canonical coordinates y: G_1 = ramp(y_1), G_{j+1} = M~(G_j, ramp(y_{j+1})),
/// ramps with overshoot eps/(2n), M~ of width eps/n; total overshoot <= eps/2 + eps/(2n).
inline Expr strongly_convex_corner_approx(const Corner& C, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("corner approx: epsilon must be positive");
  const int n = C.dim();
  if (corner_dimension(C) != n + 1 || C.pieces() != n + 1)
    throw InvalidArgument("corner approx: corner has dimension " + std::to_string(corner_dimension(C)) +
                          ", need n + 1; factorize instead");
  const CanonicalCorner cc = canonicalize_corner(C);
  const double ramp_gap = epsilon / (2.0 * n);
  const double variance = std::numbers::pi * ramp_gap * ramp_gap;  // overshoot sqrt(a / pi)
  const Theta th = Theta::gauss(epsilon / n);
  Expr G = expr::gauss_ramp(Vec::Unit(n, 0), 0.0, variance);
  for (int j = 1; j < n; ++j) G = smooth_max(G, expr::gauss_ramp(Vec::Unit(n, j), 0.0, variance), th);
  return expr::sum({expr::affine(cc.q_w, cc.q_b), expr::affine_precompose(cc.A, cc.c, G)});
}

struct Factorization {
  int k = 0;
  int n = 0;
  /// k x n with orthonormal rows spanning the gradient differences.
  Mat P;
  Vec ell_w;
  double ell_b = 0.0;
  /// n x (n - k) orthonormal basis of the flat directions.
  Mat witnesses;
  Vec x0;
  Vec singular_values;
  /// c(z) = f(P^T z) - ell(P^T z) on R^k (k >= 1).
  std::shared_ptr<const ConvexOracle> c;
};

struct FactorizationOptions {
  int samples = 256;
  double tol = 1e-8;
  /// Gradients are sampled on this exhaustion stage.
  int stage = 4;
  std::uint64_t seed = 17;
};

/// Either no factorization (nullopt: gradients span R^n) or f = c o P + ell.
inline std::optional<Factorization> detect_factorization(OraclePtr f, const FactorizationOptions& opt = {}) {
  const int n = f->dim();
  const Exhaustion ex(f->domain);
  const Region reg = ex.stage_region(opt.stage);
  Rng rng(opt.seed);
  std::vector<GradientSample> gs;
  for (int t = 0; t < 200 * opt.samples && static_cast<int>(gs.size()) < opt.samples; ++t) {
    const Vec x = rng.uniform_box(reg.lo, reg.hi);
    if (!reg.contains(x)) continue;
    try {
      gs.push_back(f->gradient_sample(x, &rng));
    } catch (const ConvergenceError&) {
    }
  }
  if (static_cast<int>(gs.size()) < std::min(opt.samples, n + 1))
    throw ConvergenceError("detect_factorization: too few valid gradient samples");
  const Vec& g0 = gs.front().gradient;
  Mat G(gs.size() - 1, n);
  for (std::size_t i = 1; i < gs.size(); ++i) G.row(i - 1) = (gs[i].gradient - g0).transpose();
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullV);
  const Vec s = svd.singularValues();
  int k = 0;
  if (s.size() > 0 && s(0) > 0.0)
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > opt.tol * s(0)) ++k;
  if (k == n) return std::nullopt;

  Factorization fz;
  fz.k = k;
  fz.n = n;
  fz.x0 = gs.front().point;
  fz.singular_values = s;
  fz.P = svd.matrixV().leftCols(k).transpose();
  fz.witnesses = svd.matrixV().rightCols(n - k);
  fz.ell_w = g0;
  fz.ell_b = 0.0;
  if (k >= 1) {
    if (!f->domain.is_all_space())
      throw DomainError("detect_factorization: lifting P(U) back into U is only supported for U = R^n");
    ConvexOracle c;
    c.name = f->name + "_reduced";
    c.domain = DomainU::all_space(k);
    const Mat Pt = fz.P.transpose();
    const Vec w = fz.ell_w;
    c.value = [f, Pt, w](const Vec& z) {
      const Vec x = Pt * z;
      return f->value(x) - w.dot(x);
    };
    if (f->has_subgradient())
      c.subgradient = [f, Pt, w](const Vec& z) {
        const Vec x = Pt * z;
        return Vec(Pt.transpose() * (f->subgradient(x) - w));
      };
    fz.c = std::make_shared<const ConvexOracle>(std::move(c));
  }
  return fz;
}

enum class StrongApproxClass { Approximable, Factors };

inline std::string to_string(StrongApproxClass c) {
  return c == StrongApproxClass::Approximable ? "Approximable" : "Factors";
}

struct Classification {
  StrongApproxClass kind = StrongApproxClass::Approximable;
  std::optional<Factorization> factorization;
};

inline Classification classify_strong_approx(OraclePtr f, const FactorizationOptions& opt = {}) {
  Classification c;
  c.factorization = detect_factorization(std::move(f), opt);
  c.kind = c.factorization ? StrongApproxClass::Factors : StrongApproxClass::Approximable;
  return c;
}

/// Sampled max |f(x + t w) - f(x) - t <ell_w, w>| over witness directions.
inline double factorization_defect(const ConvexOracle& f, const Factorization& fz, int samples = 200,
                                   std::uint64_t seed = 23) {
  Rng rng(seed);
  double worst = 0.0;
  const Exhaustion ex(f.domain);
  const Region reg = ex.stage_region(4);
  for (int i = 0, hits = 0; i < 200 * samples && hits < samples; ++i) {
    const Vec x = rng.uniform_box(reg.lo, reg.hi);
    if (!reg.contains(x)) continue;
    for (Eigen::Index q = 0; q < fz.witnesses.cols(); ++q) {
      const double t = rng.uniform(-3.0, 3.0);
      const Vec w = fz.witnesses.col(q);
      const Vec y = x + t * w;
      if (!f.domain.contains(y)) continue;
      worst = std::max(worst, std::abs(f.value(y) - f.value(x) - t * fz.ell_w.dot(w)));
    }
    ++hits;
  }
  return worst;
}

inline json to_json(const Corner& c) {
  return {{"L", to_json(c.L)}, {"b", to_json(c.b)}, {"dimension", corner_dimension(c)}};
}

inline json to_json(const Factorization& f) {
  return {{"k", f.k},         {"n", f.n},
          {"P", f.k > 0 ? to_json(f.P) : json::array()},
          {"ell_w", to_json(f.ell_w)},
          {"ell_b", f.ell_b}, {"witnesses", to_json(Mat(f.witnesses.transpose()))},
          {"x0", to_json(f.x0)}, {"singular_values", to_json(f.singular_values)}};
}

struct CornerOptions {
  int candidates = 64;
  PlMinorantOptions pl;
};

namespace detail {

// Greedily add pieces whose lifted forms add the most new rank to piece j.
inline std::vector<std::size_t> augment_to_corner(const std::vector<TangentPiece>& pieces, std::size_t j, int want,
                                                  int candidates, Rng& rng) {
  const int n = static_cast<int>(pieces[j].w.size());
  auto lifted = [&](std::size_t i) {
    Vec r(n + 1);
    r.head(n) = -pieces[i].w;
    r(n) = 1.0;
    return r;
  };
  std::vector<std::size_t> pool;
  const std::size_t p = pieces.size();
  for (std::size_t d = 1; d < p && static_cast<int>(pool.size()) < candidates / 2; ++d) {
    if (j >= d) pool.push_back(j - d);
    if (j + d < p) pool.push_back(j + d);
  }
  for (int r = 0; r < candidates / 2 && p > 1; ++r) {
    const std::size_t i = static_cast<std::size_t>(rng.next() % p);
    if (i != j) pool.push_back(i);
  }
  std::vector<std::size_t> chosen{j};
  std::vector<Vec> basis;
  auto residual = [&](const Vec& v) {
    Vec r = v;
    for (const Vec& b : basis) r -= b.dot(r) * b;
    return r;
  };
  {
    const Vec v = lifted(j);
    basis.push_back(v / v.norm());
  }
  while (static_cast<int>(chosen.size()) < want) {
    double best = 0.0;
    std::size_t arg = p;
    for (std::size_t i : pool) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      const Vec v = lifted(i);
      const double r = residual(v).norm() / v.norm();
      if (r > best) best = r, arg = i;
    }
    if (arg == p || best < 1e-8) break;
    chosen.push_back(arg);
    const Vec r = residual(lifted(arg));
    basis.push_back(r / r.norm());
  }
  return chosen;
}

}  // namespace detail

/// Bounded approximator for the strongly convex mode: tangents with
/// delta = (a - b) / 2, each extended to an (n+1)-corner of tangents,
/// corners replaced by strongly convex approximants (budget (a - b) / 4),
/// joined by nested M~ (overshoot (a - b) / 4), then shifted down.
inline BoundedApproximator corner_approximator(CornerOptions opt = {}) {
  return {"corner", [opt](const ConvexOracle& f, const StageRequest& req) {
            const double slack = req.upper - req.lower;
            const auto pieces = supporting_pieces(f, req.region, slack / 2.0, opt.pl);
            const int n = f.dim();
            if (pieces.size() < static_cast<std::size_t>(n + 1))
              throw Error("corner approximator: only " + std::to_string(pieces.size()) +
                          " supporting pieces, cannot form an (n+1)-corner");
            Rng rng = Rng(97).split(static_cast<std::uint64_t>(req.stage));
            const double corner_eps = slack / 4.0;
            std::vector<Expr> approx;
            approx.reserve(pieces.size());
            for (std::size_t j = 0; j < pieces.size(); ++j) {
              const auto idx = detail::augment_to_corner(pieces, j, n + 1, opt.candidates, rng);
              Corner C{Mat(n + 1, n), Vec(n + 1)};
              for (int r = 0; r < static_cast<int>(idx.size()); ++r) {
                C.L.row(r) = pieces[idx[r]].w.transpose();
                C.b(r) = pieces[idx[r]].b;
              }
              if (static_cast<int>(idx.size()) < n + 1 || corner_dimension(C) != n + 1)
                throw Error("corner approximator: augmentation reached rank " +
                            std::to_string(corner_dimension(Corner{C.L.topRows(idx.size()), C.b.head(idx.size())})) +
                            " < n + 1");
              approx.push_back(strongly_convex_corner_approx(C, corner_eps));
            }
            const std::size_t p = approx.size();
            const double nest_eps = p > 1 ? slack / (2.0 * static_cast<double>(p - 1)) : slack;
            const Expr N = nested_smooth_max(std::move(approx), Theta::gauss(nest_eps));
            const double overshoot = corner_eps + (p > 1 ? static_cast<double>(p - 1) * nest_eps / 2.0 : 0.0);
            return expr::shifted(N, -(req.lower + overshoot));
          }};
}

/// Result of a global approximation: a single expression, a glued
/// approximant, or a pullback z = P x of a lower-dimensional result plus ell.
class GlobalApproximation {
 public:
  enum class Kind { Direct, Glued, Pulled };

  static GlobalApproximation direct(Expr e) {
    GlobalApproximation g;
    g.kind_ = Kind::Direct;
    g.expr_ = std::move(e);
    return g;
  }
  static GlobalApproximation glued(GluedApproximant a) {
    GlobalApproximation g;
    g.kind_ = Kind::Glued;
    g.glued_ = std::make_shared<GluedApproximant>(std::move(a));
    return g;
  }
  static GlobalApproximation pulled(Mat P, Vec w, double b, GlobalApproximation inner) {
    GlobalApproximation g;
    g.kind_ = Kind::Pulled;
    g.P_ = std::move(P);
    g.w_ = std::move(w);
    g.b_ = b;
    g.inner_ = std::make_shared<GlobalApproximation>(std::move(inner));
    return g;
  }

  Kind kind() const { return kind_; }
  const std::shared_ptr<GluedApproximant>& glued_part() const { return glued_; }

  /// True when x can be evaluated from the stages already allowed.
  bool covers(const Vec& x) const {
    switch (kind_) {
      case Kind::Direct:
        return true;
      case Kind::Glued:
        return glued_->exhaustion().contains(glued_->max_stages(), x);
      case Kind::Pulled:
        return inner_->covers(P_ * x);
    }
    return false;
  }

  /// Radius r such that every |x| < r can be evaluated without new stages
  /// (for all of R^n; near a boundary of U the margin also matters).
  double coverage_radius() const {
    switch (kind_) {
      case Kind::Direct:
        return kInf;
      case Kind::Glued:
        return static_cast<double>(glued_->max_stages());
      case Kind::Pulled:
        return inner_->coverage_radius();  // P has orthonormal rows, |P x| <= |x|
    }
    return 0.0;
  }
  const Mat& projection() const { return P_; }

  Eval evaluate(const Vec& x, int order = 0) const {
    switch (kind_) {
      case Kind::Direct:
        return cvxglue::evaluate(expr_, x, order);
      case Kind::Glued:
        return glued_->evaluate(x, order);
      case Kind::Pulled: {
        Eval in = inner_->evaluate(P_ * x, order);
        Eval out = in;
        out.value = in.value + w_.dot(x) + b_;
        if (order >= 1) out.gradient = P_.transpose() * in.gradient + w_;
        if (order >= 2) out.hessian = P_.transpose() * in.hessian * P_;
        return out;
      }
    }
    throw Error("unreachable");
  }

  double value(const Vec& x) const {
    switch (kind_) {
      case Kind::Direct:
        return cvxglue::value(expr_, x);
      case Kind::Glued:
        return glued_->value(x);
      case Kind::Pulled:
        return inner_->value(P_ * x) + w_.dot(x) + b_;
    }
    throw Error("unreachable");
  }

  json to_json() const {
    switch (kind_) {
      case Kind::Direct:
        return {{"schema_version", kSchemaVersion}, {"kind", "direct"}, {"expr", expr_to_json(expr_)}};
      case Kind::Glued:
        return glued_->to_json();
      case Kind::Pulled:
        return {{"schema_version", kSchemaVersion},
                {"kind", "pulled"},
                {"P", cvxglue::to_json(P_)},
                {"ell_w", cvxglue::to_json(w_)},
                {"ell_b", b_},
                {"inner", inner_->to_json()}};
    }
    throw Error("unreachable");
  }

  static GlobalApproximation from_json(const json& j) {
    const std::string kind = j.value("kind", "");
    if (kind == "direct") return direct(expr_from_json(j.at("expr")));
    if (kind == "glued") return glued(GluedApproximant::from_json(j));
    if (kind == "pulled") {
      if (!j.contains("inner") || !j.contains("P") || !j.contains("ell_w"))
        throw SchemaError("pulled: expected P, ell_w, ell_b and inner");
      return pulled(mat_from_json(j["P"], "P"), vec_from_json(j["ell_w"], "ell_w"), num_field(j, "ell_b", "pulled"),
                    from_json(j["inner"]));
    }
    throw SchemaError("kind: expected \"direct\", \"glued\" or \"pulled\"");
  }

 private:
  Kind kind_ = Kind::Direct;
  Expr expr_;
  std::shared_ptr<GluedApproximant> glued_;
  Mat P_;
  Vec w_;
  double b_ = 0.0;
  std::shared_ptr<GlobalApproximation> inner_;
};

struct StrongApproxOptions {
  int stages = 12;
  FactorizationOptions factor;
  CornerOptions corner;
  GlueOptions glue;
};

struct StrongApproxResult {
  Classification classification;
  GlobalApproximation approximation;
};

/// Strongly convex C^2 approximation with f - eps <= g <= f when the gradient
/// range is full-dimensional; otherwise f = c o P + ell and the result is the
/// pullback of an approximation of c (convex, flat along ker P).
inline StrongApproxResult strongly_convex_global_approx(OraclePtr f, double epsilon, const StrongApproxOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw InvalidArgument("strongly_convex_global_approx: epsilon must be positive");
  StrongApproxResult r;
  r.classification = classify_strong_approx(f, opt.factor);
  if (r.classification.kind == StrongApproxClass::Factors) {
    const Factorization& fz = *r.classification.factorization;
    if (fz.k == 0) {
      // Affine: ell + f(x0) - ell(x0) is f itself.
      const double b = f->value(fz.x0) - fz.ell_w.dot(fz.x0);
      r.approximation = GlobalApproximation::direct(expr::affine(fz.ell_w, b));
      return r;
    }
    StrongApproxResult inner = strongly_convex_global_approx(fz.c, epsilon, opt);
    r.approximation = GlobalApproximation::pulled(fz.P, fz.ell_w, fz.ell_b, std::move(inner.approximation));
    return r;
  }
  r.approximation = GlobalApproximation::glued(
      glue(f, f->domain, epsilon / 2.0, corner_approximator(opt.corner), opt.stages, opt.glue));
  return r;
}

/// The smooth (not necessarily strongly convex) route: glue with the given
/// bounded approximator, f - 2 eps <= g <= f.
inline GlobalApproximation smooth_global_approx(OraclePtr f, double epsilon, BoundedApproximator approx, int stages,
                                                GlueOptions opt = {}) {
  return GlobalApproximation::glued(glue(f, f->domain, epsilon, std::move(approx), stages, opt));
}

}  // namespace cvxglue
