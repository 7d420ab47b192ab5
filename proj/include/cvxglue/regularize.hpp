#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "cvxglue/domain.hpp"
#include "cvxglue/expr.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/smoothmax.hpp"

namespace cvxglue {

/// Minimize a convex phi on [a, b] (Brent). Returns (argmin, min).
template <class F>
std::pair<double, double> minimize_1d(F&& phi, double a, double b, int bits = 40) {
  if (!(a <= b)) throw InvalidArgument("minimize_1d: empty bracket");
  if (a == b) return {a, phi(a)};
  std::uintmax_t iters = 500;
  auto r = boost::math::tools::brent_find_minima(phi, a, b, std::min(bits, std::numeric_limits<double>::digits / 2 + 8),
                                                 iters);
  // Brent never probes the endpoints; the minimum of a convex function may sit there.
  std::pair<double, double> best{r.first, r.second};
  for (double e : {a, b}) {
    const double v = phi(e);
    if (v < best.second) best = {e, v};
  }
  return best;
}

struct TangentPiece {
  Vec w;
  double b = 0.0;
  double at(const Vec& x) const { return w.dot(x) + b; }
};

struct PlMinorantOptions {
  std::size_t max_cells = 4'000'000;
  std::size_t max_pieces = 500'000;
  int max_level = 46;
  bool allow_high_dim = false;
};

namespace detail {

struct VertexSample {
  bool inside = false;
  Vec point;
  double value = 0.0;
  Vec grad;
};

// sup over the cell of (convex interpolant of f) - max of the vertex tangents.
inline double cell_gap_bound(const std::vector<const VertexSample*>& vs) {
  const std::size_t k = vs.size();
  if (k == 2 && vs[0]->point.size() == 1) {
    const VertexSample *l = vs[0], *r = vs[1];
    if (l->point(0) > r->point(0)) std::swap(l, r);
    const double y1 = l->point(0), y2 = r->point(0), s1 = l->grad(0), s2 = r->grad(0);
    if (!(y2 > y1)) return 0.0;
    double xs;
    if (s2 - s1 <= 0.0) xs = y1;
    else xs = std::clamp((r->value - l->value + s1 * y1 - s2 * y2) / (s1 - s2), y1, y2);
    const double chord = l->value + (r->value - l->value) * (xs - y1) / (y2 - y1);
    const double tangent = std::max(l->value + s1 * (xs - y1), r->value + s2 * (xs - y2));
    return std::max(chord - tangent, 0.0);
  }
  const double n = static_cast<double>(vs[0]->point.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      worst = std::max(worst, (vs[i]->grad - vs[j]->grad).dot(vs[i]->point - vs[j]->point));
  return 0.5 * (1.0 - 1.0 / (n + 1.0)) * worst;
}

}  // namespace detail

/// Supporting hyperplanes of f at the vertices of an adaptive dyadic cell
/// partition of B's bounding box. A cell is accepted once the certified gap
/// between the convex interpolant and the tangent max is <= delta.
inline std::vector<TangentPiece> supporting_pieces(const ConvexOracle& f, const Region& B, double delta,
                                                   const PlMinorantOptions& opt = {}) {
  if (!(delta > 0.0)) throw InvalidArgument("pl_minorant: delta must be positive");
  const int n = f.dim();
  if (B.dim() != n) throw InvalidArgument("pl_minorant: region and oracle dimensions differ");
  if (n > 4 || (n == 4 && !opt.allow_high_dim))
    throw InvalidArgument("pl_minorant: cell refinement is limited to dimension <= 3 (4 with allow_high_dim)");
  if (B.is_empty_box()) throw InvalidArgument("pl_minorant: empty region");

  const Vec lo = B.lo, span = B.hi - B.lo;
  const int D = opt.max_level;
  using Key = std::vector<std::int64_t>;
  std::map<Key, detail::VertexSample> cache;
  Rng rng(0x5eed);

  auto vertex = [&](const Key& key) -> const detail::VertexSample& {
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    detail::VertexSample s;
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = lo(i) + span(i) * std::ldexp(static_cast<double>(key[i]), -D);
    s.inside = f.domain.contains(x);
    if (s.inside) {
      const GradientSample g = f.gradient_sample(x, &rng);
      s.point = g.point;
      s.value = g.value;
      s.grad = g.gradient;
    }
    return cache.emplace(key, std::move(s)).first->second;
  };

  struct Cell {
    std::vector<std::int64_t> ix;
    int level;
  };
  std::vector<Cell> stack{{std::vector<std::int64_t>(n, 0), 0}};
  std::vector<Key> used;
  std::size_t cells = 0;
  const int corners = 1 << n;

  while (!stack.empty()) {
    const Cell c = std::move(stack.back());
    stack.pop_back();
    if (++cells > opt.max_cells) throw BudgetExceeded("pl_minorant: delta too small for the cell budget");
    const double scale = std::ldexp(1.0, -c.level);
    Vec center(n);
    for (int i = 0; i < n; ++i) center(i) = lo(i) + span(i) * scale * (c.ix[i] + 0.5);
    const double rho = 0.5 * scale * span.norm();
    if (!B.may_intersect(center, rho)) continue;

    std::vector<Key> keys(corners, Key(n));
    std::vector<const detail::VertexSample*> vs(corners);
    bool outside = false;
    for (int m = 0; m < corners; ++m) {
      for (int i = 0; i < n; ++i) keys[m][i] = (c.ix[i] + ((m >> i) & 1)) << (D - c.level);
      vs[m] = &vertex(keys[m]);
      outside |= !vs[m]->inside;
    }
    const bool accept = !outside && (n == 1 ? detail::cell_gap_bound({vs[0], vs[1]}) : detail::cell_gap_bound(vs)) <= delta;
    if (accept) {
      for (auto& k : keys) used.push_back(std::move(k));
      continue;
    }
    if (c.level >= D) {
      if (outside) throw InvalidArgument("pl_minorant: oracle domain smaller than the region");
      throw BudgetExceeded("pl_minorant: refinement depth exhausted");
    }
    for (int m = 0; m < corners; ++m) {
      Cell child{c.ix, c.level + 1};
      for (int i = 0; i < n; ++i) child.ix[i] = 2 * c.ix[i] + ((m >> i) & 1);
      stack.push_back(std::move(child));
    }
  }

  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::vector<std::pair<std::vector<double>, TangentPiece>> pieces;
  pieces.reserve(used.size());
  for (const auto& k : used) {
    const auto& s = cache.at(k);
    TangentPiece p{s.grad, s.value - s.grad.dot(s.point)};
    std::vector<double> key(p.w.data(), p.w.data() + n);
    key.push_back(p.b);
    pieces.emplace_back(std::move(key), std::move(p));
  }
  std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  pieces.erase(std::unique(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
               pieces.end());
  // Drop pieces dominated by an identical-slope piece with a larger offset.
  std::vector<TangentPiece> out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i + 1 < pieces.size() &&
        std::equal(pieces[i].first.begin(), pieces[i].first.end() - 1, pieces[i + 1].first.begin()))
      continue;
    out.push_back(std::move(pieces[i].second));
  }
  if (out.empty()) throw InvalidArgument("pl_minorant: region does not meet the oracle domain");
  if (out.size() > opt.max_pieces) throw BudgetExceeded("pl_minorant: delta too small for the piece budget");
  return out;
}

inline Expr max_of_pieces(const std::vector<TangentPiece>& pieces) {
  const int n = static_cast<int>(pieces.front().w.size());
  Mat W(pieces.size(), n);
  Vec b(pieces.size());
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    W.row(j) = pieces[j].w.transpose();
    b(j) = pieces[j].b;
  }
  return expr::max_of_affine(W, b);
}

/// Piecewise-linear minorant m <= f on U with f - delta <= m on B.
inline Expr pl_minorant(const ConvexOracle& f, const Region& B, double delta, const PlMinorantOptions& opt = {}) {
  return max_of_pieces(supporting_pieces(f, B, delta, opt));
}

/// nested_smooth_max of the pieces of m, shifted down by (p - 1) eps / 2 + b,
/// so m - (p - 1) eps / 2 - b <= h <= m - b.
inline Expr smooth_minorant(const Expr& m, double epsilon, double lower_shift, ThetaBackend backend = ThetaBackend::Poly,
                            int poly_k = 4) {
  const auto* node = std::get_if<MaxOfAffineNode>(&m.node().v);
  if (!node) throw InvalidArgument("smooth_minorant: expected a max of affine pieces");
  if (!(epsilon > 0.0) || !(lower_shift >= 0.0)) throw InvalidArgument("smooth_minorant: need epsilon > 0, b >= 0");
  const auto p = node->W.rows();
  std::vector<Expr> pieces;
  pieces.reserve(p);
  for (Eigen::Index j = 0; j < p; ++j) pieces.push_back(expr::affine(node->W.row(j).transpose(), node->b(j)));
  if (p == 1) return expr::shifted(pieces.front(), -lower_shift);
  const Theta th = backend == ThetaBackend::Poly ? Theta::poly(epsilon, poly_k) : Theta::gauss(epsilon);
  return expr::shifted(nested_smooth_max(std::move(pieces), th), -(static_cast<double>(p - 1) * epsilon / 2.0) - lower_shift);
}

/// f convolved with a compactly supported (Poly) or Gaussian kernel of the given radius.
inline Expr mollify(std::shared_ptr<const ConvexOracle> f, double epsilon, MollifierKernel kernel = MollifierKernel::Poly,
                    int nodes_per_axis = 32) {
  return expr::mollified(std::move(f), epsilon, kernel, nodes_per_axis);
}

namespace detail {

// Cyclic exact line searches along coordinates and the given extra
// directions; each line is clipped to the box and the open domain.
template <class Phi, class Dirs>
std::pair<Vec, double> descend(Phi&& phi, Vec y, const Vec& lo, const Vec& hi, const DomainU& U, Dirs&& extra_dirs,
                               double tol, int sweeps) {
  const int n = static_cast<int>(y.size());
  double fy = phi(y);
  for (int s = 0; s < sweeps; ++s) {
    const double start = fy;
    std::vector<Vec> dirs;
    for (int i = 0; i < n; ++i) dirs.push_back(Vec::Unit(n, i));
    for (auto& d : extra_dirs(y)) dirs.push_back(std::move(d));
    for (const Vec& d : dirs) {
      if (!(d.norm() > 0)) continue;
      double tlo = -kInf, thi = kInf;
      for (int i = 0; i < n; ++i) {
        if (d(i) > 0) thi = std::min(thi, (hi(i) - y(i)) / d(i)), tlo = std::max(tlo, (lo(i) - y(i)) / d(i));
        if (d(i) < 0) thi = std::min(thi, (lo(i) - y(i)) / d(i)), tlo = std::max(tlo, (hi(i) - y(i)) / d(i));
      }
      auto [ulo, uhi] = U.line_interval(y, d);
      const double shrink = 1e-12 * (1.0 + y.norm());
      tlo = std::max(tlo, ulo + shrink);
      thi = std::min(thi, uhi - shrink);
      if (!(tlo < thi)) continue;
      auto [t, v] = minimize_1d([&](double t) { return phi(Vec(y + t * d)); }, tlo, thi);
      if (v < fy) y += t * d, fy = v;
    }
    if (start - fy <= tol * (1.0 + std::abs(fy))) break;
  }
  return {y, fy};
}

}  // namespace detail

struct InfConvOptions {
  int multistart = 8;
  double tol = 1e-10;
  int sweeps = 80;
  std::uint64_t seed = 11;
  bool warn = true;
};

/// g(x) = inf { f(y) + L |x - y| : y in U cap search box }. Equals f on B when
/// L >= Lip(f|B); L-Lipschitz and <= f everywhere the search box is large enough.
class LipschitzExtension {
 public:
  struct Detail {
    double value;
    Vec argmin;
    bool at_search_boundary;
  };

  LipschitzExtension(OraclePtr f, double L, Vec search_lo, Vec search_hi, InfConvOptions opt = {})
      : f_(std::move(f)), L_(L), lo_(std::move(search_lo)), hi_(std::move(search_hi)), opt_(opt) {}

  int dim() const { return f_->dim(); }
  double lipschitz() const { return L_; }
  std::size_t boundary_hits() const { return hits_->load(); }

  Detail evaluate(const Vec& x) const {
    const int n = dim();
    if (x.size() != n) throw DomainError("inf_conv: point has the wrong dimension");
    auto phi = [&](const Vec& y) { return f_->value(y) + L_ * (x - y).norm(); };
    auto dirs = [&](const Vec& y) {
      std::vector<Vec> d;
      const Vec toward = x - y;
      if (toward.norm() > 0) d.push_back(toward / toward.norm());
      if (f_->has_subgradient()) d.push_back(-f_->subgradient(y));
      return d;
    };
    std::vector<Vec> starts;
    const bool x_in = f_->domain.contains(x) && (x.array() >= lo_.array()).all() && (x.array() <= hi_.array()).all();
    if (x_in) starts.push_back(x);
    Vec mid = 0.5 * (lo_ + hi_);
    if (f_->domain.contains(mid)) starts.push_back(mid);
    Rng rng = Rng(opt_.seed).split(std::hash<double>{}(x.sum()));
    for (int tries = 0; static_cast<int>(starts.size()) < opt_.multistart && tries < 64 * opt_.multistart; ++tries) {
      Vec y = rng.uniform_box(lo_, hi_);
      if (f_->domain.contains(y)) starts.push_back(y);
    }
    if (starts.empty()) throw DomainError("inf_conv: search box does not meet the domain");
    Detail best{kInf, Vec(), false};
    for (const Vec& s : starts) {
      auto [y, v] = n == 1 ? line_1d(phi, s) : detail::descend(phi, s, lo_, hi_, f_->domain, dirs, opt_.tol, opt_.sweeps);
      if (v < best.value) best = {v, y, false};
    }
    // y = x is always admissible when x is in the search set.
    if (x_in) {
      const double fx = f_->value(x);
      if (fx <= best.value) best = {fx, x, false};
    }
    if (!std::isfinite(best.value)) throw ConvergenceError("inf_conv: inner minimization failed");
    const double edge = 1e-7 * (1.0 + (hi_ - lo_).norm());
    for (int i = 0; i < n; ++i)
      if (best.argmin(i) - lo_(i) < edge || hi_(i) - best.argmin(i) < edge) best.at_search_boundary = true;
    if (best.at_search_boundary && hits_->fetch_add(1) == 0 && opt_.warn)
      std::cerr << "warning: inf_conv minimizer reached the search boundary; enlarge the search region\n";
    return best;
  }

  double value(const Vec& x) const { return evaluate(x).value; }

 private:
  template <class Phi>
  std::pair<Vec, double> line_1d(Phi& phi, const Vec&) const {
    double a = lo_(0), b = hi_(0);
    auto [ulo, uhi] = f_->domain.line_interval(Vec::Zero(1), Vec::Ones(1));
    const double shrink = 1e-12 * (1.0 + std::abs(a) + std::abs(b));
    a = std::max(a, ulo + shrink);
    b = std::min(b, uhi - shrink);
    auto [t, v] = minimize_1d([&](double t) { return phi(Vec::Constant(1, t)); }, a, b, 52);
    return {Vec::Constant(1, t), v};
  }

  OraclePtr f_;
  double L_;
  Vec lo_, hi_;
  InfConvOptions opt_;
  std::shared_ptr<std::atomic<std::size_t>> hits_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Builds the Lipschitz extension after checking L against sampled
/// gradients of f on B.
inline LipschitzExtension inf_conv_lipschitz(OraclePtr f, double L, const Region& B, const Vec& search_lo,
                                             const Vec& search_hi, InfConvOptions opt = {}, int samples = 256) {
  if (!(L > 0.0)) throw InvalidArgument("inf_conv: L must be positive");
  if (!B.contains(B.lo) && !B.contains(B.hi) && B.is_empty_box()) throw InvalidArgument("inf_conv: empty region");
  if ((search_lo.array() > B.lo.array()).any() || (search_hi.array() < B.hi.array()).any())
    throw InvalidArgument("inf_conv: search region must contain B");
  Rng rng(opt.seed);
  int hits = 0;
  double worst = 0.0;
  for (int i = 0; i < 64 * samples && hits < samples; ++i) {
    const Vec x = rng.uniform_box(B.lo, B.hi);
    if (!B.contains(x) || !f->domain.contains(x)) continue;
    ++hits;
    worst = std::max(worst, f->gradient_sample(x, &rng).gradient.norm());
  }
  if (worst > L * (1.0 + 1e-9))
    throw InvalidArgument("inf_conv: L is below a sampled gradient norm of f on B (" + std::to_string(worst) + ")");
  return LipschitzExtension(std::move(f), L, search_lo, search_hi, opt);
}

/// f_lambda(x) = inf_y f(y) + |x - y|^2 / (2 lambda), with the prox point and
/// gradient (x - prox(x)) / lambda.
class MoreauEnvelope {
 public:
  MoreauEnvelope(OraclePtr f, double lambda, double tol = 1e-12, int sweeps = 200)
      : f_(std::move(f)), lambda_(lambda), tol_(tol), sweeps_(sweeps) {
    if (!(lambda > 0.0)) throw InvalidArgument("moreau: lambda must be positive");
  }

  int dim() const { return f_->dim(); }
  double lambda() const { return lambda_; }

  std::pair<Vec, double> prox_and_value(const Vec& x) const {
    if (!f_->domain.contains(x)) throw DomainError("moreau: point outside the domain");
    const int n = dim();
    auto phi = [&](const Vec& y) { return f_->value(y) + (x - y).squaredNorm() / (2.0 * lambda_); };
    // |x - prox(x)| <= lambda |xi| for any subgradient xi at x.
    const double reach = lambda_ * f_->gradient_sample(x).gradient.norm() * (1.0 + 1e-9) + 1e-12;
    if (!std::isfinite(reach)) throw ConvergenceError("moreau: non-finite subgradient");
    const Vec lo = (x.array() - reach).matrix(), hi = (x.array() + reach).matrix();
    std::pair<Vec, double> best;
    if (n == 1) {
      auto [ulo, uhi] = f_->domain.line_interval(x, Vec::Ones(1));
      const double a = x(0) + std::max(-reach, ulo), b = x(0) + std::min(reach, uhi);
      auto [t, v] = minimize_1d([&](double t) { return phi(Vec::Constant(1, t)); }, a, b, 52);
      best = {Vec::Constant(1, t), v};
    } else {
      auto dirs = [&](const Vec& y) {
        std::vector<Vec> d;
        const Vec g = f_->gradient_sample(y).gradient + (y - x) / lambda_;
        if (g.norm() > 0) d.push_back(-g / g.norm());
        return d;
      };
      best = detail::descend(phi, x, lo, hi, f_->domain, dirs, tol_, sweeps_);
    }
    if (!std::isfinite(best.second)) throw ConvergenceError("moreau: inner minimization diverged");
    return best;
  }

  double value(const Vec& x) const { return prox_and_value(x).second; }
  Vec prox(const Vec& x) const { return prox_and_value(x).first; }
  Vec gradient(const Vec& x) const { return (x - prox(x)) / lambda_; }

 private:
  OraclePtr f_;
  double lambda_, tol_;
  int sweeps_;
};

inline MoreauEnvelope moreau(OraclePtr f, double lambda) { return MoreauEnvelope(std::move(f), lambda); }

}  // namespace cvxglue
