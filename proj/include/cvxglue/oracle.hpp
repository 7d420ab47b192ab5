#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cvxglue/domain.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/types.hpp"

namespace cvxglue {

/// Point y together with f(y) and a subgradient of f at y.
struct GradientSample {
  Vec point;
  double value = 0.0;
  Vec gradient;
};

/// Black-box convex function on an open convex domain.
struct ConvexOracle {
  std::string name = "f";
  DomainU domain;
  std::function<double(const Vec&)> value;
  /// Optional exact subgradient; finite differences are used when empty.
  std::function<Vec(const Vec&)> subgradient;
  /// Optional Lipschitz bound over a region.
  std::function<double(const Region&)> lipschitz;

  int dim() const { return domain.dim(); }
  bool has_subgradient() const { return static_cast<bool>(subgradient); }

  double operator()(const Vec& x) const {
    if (!domain.contains(x)) throw DomainError("oracle '" + name + "': point outside the domain");
    return value(x);
  }

  /// Subgradient at x, or a kink-checked central-difference gradient.
  ///
  /// Without an exact subgradient the returned sample may sit at a point
  /// slightly moved away from x: when one-sided slopes differ by more than
  /// kink_tol the point is perturbed and retried.
  GradientSample gradient_sample(const Vec& x, Rng* rng = nullptr, double step = 1e-6,
                                 double kink_tol = 1e-3) const {
    if (!domain.contains(x)) throw DomainError("oracle '" + name + "': point outside the domain");
    if (subgradient) return {x, value(x), subgradient(x)};
    Rng local(0x6d2b79f5);
    Rng& r = rng ? *rng : local;
    Vec y = x;
    for (int attempt = 0; attempt < 16; ++attempt) {
      const double fy = value(y);
      Vec g(y.size());
      bool kink = false;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        Vec yp = y, ym = y;
        yp(i) += step;
        ym(i) -= step;
        if (!domain.contains(yp) || !domain.contains(ym)) {
          kink = true;
          break;
        }
        const double fp = value(yp), fm = value(ym);
        const double fwd = (fp - fy) / step, bwd = (fy - fm) / step;
        if (std::abs(fwd - bwd) > kink_tol * std::max(1.0, std::abs(fwd) + std::abs(bwd))) {
          kink = true;
          break;
        }
        g(i) = (fp - fm) / (2.0 * step);
      }
      if (!kink) return {y, fy, g};
      const double radius = 1e-4 * std::pow(2.0, attempt) * std::max(1.0, x.norm());
      Vec cand = x + radius * r.direction(static_cast<int>(x.size()));
      if (domain.contains(cand)) y = cand;
    }
    throw ConvergenceError("oracle '" + name + "': could not find a differentiability point near x");
  }

  Vec gradient(const Vec& x) const { return gradient_sample(x).gradient; }

  /// Lipschitz bound on the region: the provided estimator, else the largest
  /// sampled gradient norm times a safety factor.
  double lipschitz_on(const Region& region, int samples = 256, std::uint64_t seed = 7) const {
    if (lipschitz) return lipschitz(region);
    Rng rng(seed);
    double best = 0.0;
    int hits = 0;
    for (int i = 0; i < 50 * samples && hits < samples; ++i) {
      const Vec x = rng.uniform_box(region.lo, region.hi);
      if (!region.contains(x) || !domain.contains(x)) continue;
      ++hits;
      best = std::max(best, gradient_sample(x, &rng).gradient.norm());
    }
    return 1.1 * best;
  }
};

using OraclePtr = std::shared_ptr<const ConvexOracle>;

/// Built-in convex families. Each returns an oracle with exact subgradients.
namespace family {

inline ConvexOracle max_affine(const Mat& W, const Vec& b) {
  if (W.rows() != b.size() || W.rows() == 0) throw InvalidArgument("max_affine: need matching nonempty W, b");
  ConvexOracle f;
  f.name = "max_affine";
  f.domain = DomainU::all_space(static_cast<int>(W.cols()));
  f.value = [W, b](const Vec& x) { return (W * x + b).maxCoeff(); };
  f.subgradient = [W, b](const Vec& x) {
    Eigen::Index j;
    (W * x + b).maxCoeff(&j);
    return Vec(W.row(j).transpose());
  };
  f.lipschitz = [W](const Region&) { return W.rowwise().norm().maxCoeff(); };
  return f;
}

/// x^T Q x + w.x + b with Q symmetric positive semidefinite.
inline ConvexOracle quadform(const Mat& Q, const Vec& w, double b) {
  if (Q.rows() != Q.cols() || Q.rows() != w.size()) throw InvalidArgument("quadform: dimension mismatch");
  if ((Q - Q.transpose()).norm() > 1e-12 * (1.0 + Q.norm())) throw InvalidArgument("quadform: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + Q.norm())) throw InvalidArgument("quadform: Q must be PSD");
  ConvexOracle f;
  f.name = "quadform";
  f.domain = DomainU::all_space(static_cast<int>(w.size()));
  f.value = [Q, w, b](const Vec& x) { return x.dot(Q * x) + w.dot(x) + b; };
  f.subgradient = [Q, w](const Vec& x) { return Vec(2.0 * Q * x + w); };
  return f;
}

/// scale * |a.x + c|.
inline ConvexOracle abs_comp(const Vec& a, double c, double scale = 1.0) {
  if (scale < 0) throw InvalidArgument("abs_comp: scale must be nonnegative");
  ConvexOracle f;
  f.name = "abs_comp";
  f.domain = DomainU::all_space(static_cast<int>(a.size()));
  f.value = [a, c, scale](const Vec& x) { return scale * std::abs(a.dot(x) + c); };
  f.subgradient = [a, c, scale](const Vec& x) {
    const double s = a.dot(x) + c;
    return Vec(scale * (s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0)) * a);
  };
  f.lipschitz = [a, scale](const Region&) { return scale * a.norm(); };
  return f;
}

/// scale * exp(a.x + c).
inline ConvexOracle exp_dir(const Vec& a, double c, double scale = 1.0) {
  if (scale < 0) throw InvalidArgument("exp_dir: scale must be nonnegative");
  ConvexOracle f;
  f.name = "exp_dir";
  f.domain = DomainU::all_space(static_cast<int>(a.size()));
  f.value = [a, c, scale](const Vec& x) { return scale * std::exp(a.dot(x) + c); };
  f.subgradient = [a, c, scale](const Vec& x) { return Vec(scale * std::exp(a.dot(x) + c) * a); };
  return f;
}

/// Huber function of s = a.x + c: s^2 / (2 delta) for |s| <= delta, |s| - delta/2 beyond.
inline ConvexOracle huber(const Vec& a, double c, double delta) {
  if (!(delta > 0)) throw InvalidArgument("huber: delta must be positive");
  ConvexOracle f;
  f.name = "huber";
  f.domain = DomainU::all_space(static_cast<int>(a.size()));
  f.value = [a, c, delta](const Vec& x) {
    const double s = a.dot(x) + c;
    return std::abs(s) <= delta ? s * s / (2.0 * delta) : std::abs(s) - 0.5 * delta;
  };
  f.subgradient = [a, c, delta](const Vec& x) {
    const double s = a.dot(x) + c;
    const double d = std::abs(s) <= delta ? s / delta : (s > 0 ? 1.0 : -1.0);
    return Vec(d * a);
  };
  f.lipschitz = [a](const Region&) { return a.norm(); };
  return f;
}

/// |a.x + c|^p with p >= 1.
inline ConvexOracle pow_abs(const Vec& a, double c, double p) {
  if (!(p >= 1.0)) throw InvalidArgument("pow_abs: exponent must be >= 1");
  ConvexOracle f;
  f.name = "pow_abs";
  f.domain = DomainU::all_space(static_cast<int>(a.size()));
  f.value = [a, c, p](const Vec& x) { return std::pow(std::abs(a.dot(x) + c), p); };
  f.subgradient = [a, c, p](const Vec& x) {
    const double s = a.dot(x) + c;
    if (s == 0.0) return Vec(Vec::Zero(a.size()));
    return Vec(p * std::pow(std::abs(s), p - 1.0) * (s > 0 ? 1.0 : -1.0) * a);
  };
  return f;
}

inline ConvexOracle affine(const Vec& w, double b) {
  ConvexOracle f;
  f.name = "affine";
  f.domain = DomainU::all_space(static_cast<int>(w.size()));
  f.value = [w, b](const Vec& x) { return w.dot(x) + b; };
  f.subgradient = [w](const Vec&) { return w; };
  f.lipschitz = [w](const Region&) { return w.norm(); };
  return f;
}

inline ConvexOracle sum(std::vector<ConvexOracle> terms) {
  if (terms.empty()) throw InvalidArgument("sum: need at least one term");
  const int n = terms.front().dim();
  for (const auto& t : terms)
    if (t.dim() != n) throw InvalidArgument("sum: terms have different dimensions");
  ConvexOracle f;
  f.name = "sum";
  f.domain = terms.front().domain;
  bool all_sub = true, all_lip = true;
  for (const auto& t : terms) all_sub &= t.has_subgradient(), all_lip &= static_cast<bool>(t.lipschitz);
  auto shared = std::make_shared<std::vector<ConvexOracle>>(std::move(terms));
  f.value = [shared](const Vec& x) {
    double s = 0.0;
    for (const auto& t : *shared) s += t.value(x);
    return s;
  };
  if (all_sub) {
    f.subgradient = [shared](const Vec& x) {
      Vec g = Vec::Zero(x.size());
      for (const auto& t : *shared) g += t.subgradient(x);
      return g;
    };
  }
  if (all_lip) {
    f.lipschitz = [shared](const Region& r) {
      double l = 0.0;
      for (const auto& t : *shared) l += t.lipschitz(r);
      return l;
    };
  }
  return f;
}

inline ConvexOracle scale(double lambda, ConvexOracle inner) {
  if (!(lambda >= 0)) throw InvalidArgument("scale: lambda must be nonnegative");
  ConvexOracle f;
  f.name = "scale";
  f.domain = inner.domain;
  auto in = std::make_shared<ConvexOracle>(std::move(inner));
  f.value = [in, lambda](const Vec& x) { return lambda * in->value(x); };
  if (in->has_subgradient()) f.subgradient = [in, lambda](const Vec& x) { return Vec(lambda * in->subgradient(x)); };
  if (in->lipschitz) f.lipschitz = [in, lambda](const Region& r) { return lambda * in->lipschitz(r); };
  return f;
}

/// x -> inner(P x) + w.x + b on R^n, with inner defined on all of R^k.
inline ConvexOracle pullback(const Mat& P, const Vec& w, double b, ConvexOracle inner) {
  if (P.rows() != inner.dim() || P.cols() != w.size()) throw InvalidArgument("pullback: dimension mismatch");
  if (!inner.domain.is_all_space()) throw InvalidArgument("pullback: inner oracle must be defined on all of R^k");
  ConvexOracle f;
  f.name = "pullback";
  f.domain = DomainU::all_space(static_cast<int>(P.cols()));
  auto in = std::make_shared<ConvexOracle>(std::move(inner));
  f.value = [in, P, w, b](const Vec& x) { return in->value(P * x) + w.dot(x) + b; };
  if (in->has_subgradient())
    f.subgradient = [in, P, w](const Vec& x) { return Vec(P.transpose() * in->subgradient(P * x) + w); };
  return f;
}

}  // namespace family

}  // namespace cvxglue
