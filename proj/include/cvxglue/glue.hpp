#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cvxglue/domain.hpp"
#include "cvxglue/expr.hpp"
#include "cvxglue/expr_json.hpp"
#include "cvxglue/oracle.hpp"
#include "cvxglue/regularize.hpp"
#include "cvxglue/rng.hpp"
#include "cvxglue/smoothmax.hpp"

namespace cvxglue {

/// One call of a bounded approximator: find a smooth convex h with
/// f - upper <= h on region and h <= f - lower on the whole domain.
struct StageRequest {
  int stage = 1;
  Region region;
  double upper = 1.0;
  double lower = 0.5;
};

struct BoundedApproximator {
  std::string name;
  std::function<Expr(const ConvexOracle&, const StageRequest&)> build;
};

/// Supporting hyperplanes with delta = (a - b) / 2, then a nested smooth max
/// whose overshoot (p - 1) eps / 2 uses the other half of the slack.
inline BoundedApproximator hyperplane_approximator(ThetaBackend backend = ThetaBackend::Poly, int poly_k = 4,
                                                   PlMinorantOptions opt = {}) {
  return {"hyperplane", [=](const ConvexOracle& f, const StageRequest& req) {
            const double slack = req.upper - req.lower;
            auto pieces = supporting_pieces(f, req.region, slack / 2.0, opt);
            const Expr m = max_of_pieces(pieces);
            const double eps = pieces.size() > 1 ? slack / static_cast<double>(pieces.size() - 1) : slack;
            return smooth_minorant(m, eps, req.lower, backend, poly_k);
          }};
}

/// For targets that already are smooth closed-form expressions: h = f - (a + b) / 2.
inline BoundedApproximator shift_approximator(Expr f_expr) {
  return {"shift", [f_expr](const ConvexOracle& f, const StageRequest& req) {
            if (f_expr.dim() != f.dim()) throw InvalidArgument("shift approximator: dimension mismatch");
            return expr::shifted(f_expr, -0.5 * (req.upper + req.lower));
          }};
}

struct GlueOptions {
  int contract_samples = 2048;
  bool check_contract = true;
  std::uint64_t seed = 20;
  /// Relative slack for sampled contract checks.
  double tol = 1e-9;
};

struct StageRecord {
  int n = 0;
  double upper = 0.0, lower = 0.0;
  /// c_n in f_n = f - c_n.
  double shift = 0.0;
  /// Width of the smooth max joining g_{n-1} and h_n (unused for n = 1).
  double smoothing = 0.0;
  /// B_n has no points; piece and glued stay null.
  bool empty = false;
  Expr piece;  // h_n
  Expr glued;  // g_n
};

/// g = lim g_n with g_1 = h_1, g_n = M_{eps/10^n}(g_{n-1}, h_n); evaluation at x
/// uses the smallest n with x in B_n, where g = g_n.
class GluedApproximant {
 public:
  GluedApproximant(OraclePtr f, DomainU U, double epsilon, BoundedApproximator approx, int max_stages,
                   GlueOptions opt = {})
      : f_(std::move(f)),
        ex_(std::move(U)),
        epsilon_(epsilon),
        approx_(std::move(approx)),
        max_stages_(max_stages),
        opt_(opt),
        state_(std::make_shared<State>()) {
    if (!(epsilon > 0.0)) throw InvalidArgument("glue: epsilon must be positive");
    if (max_stages < 1) throw InvalidArgument("glue: need at least one stage");
    if (f_ && f_->dim() != ex_.dim()) throw InvalidArgument("glue: oracle and domain dimensions differ");
  }

  static double margin_upper(double eps, int n) { return eps / std::ldexp(1.0, n - 1); }
  static double margin_lower(double eps, int n) { return eps / std::ldexp(1.0, n); }
  static double level_shift(double eps, int n) { return eps * (2.0 - std::ldexp(1.0, 2 - n)); }
  static double smoothing_width(double eps, int n) { return eps / std::pow(10.0, n); }

  int dim() const { return ex_.dim(); }
  double epsilon() const { return epsilon_; }
  int max_stages() const { return max_stages_; }
  const Exhaustion& exhaustion() const { return ex_; }
  const std::string& approximator_name() const { return approx_.name; }

  int realized_stages() const {
    std::lock_guard<std::mutex> lock(state_->mu);
    return static_cast<int>(state_->stages.size());
  }

  void realize(int N) {
    if (N > max_stages_) throw BudgetExceeded("glue: stage budget exhausted, extend stages");
    std::lock_guard<std::mutex> lock(state_->mu);
    while (static_cast<int>(state_->stages.size()) < N) build_next();
  }

  StageRecord stage(int n) {
    realize(n);
    std::lock_guard<std::mutex> lock(state_->mu);
    return state_->stages.at(n - 1);
  }

  /// First stage >= n whose set is nonempty. B_n is inside it, so its glued
  /// expression is the one to evaluate on B_n.
  int effective_stage(int n) {
    for (int m = n; m <= max_stages_; ++m)
      if (!stage(m).empty) return m;
    throw BudgetExceeded("glue: every stage up to B_N is empty, extend stages");
  }

  Expr stage_expr(int n) { return stage(effective_stage(n)).glued; }
  Expr piece(int n) { return stage(n).piece; }

  /// Smallest n with x in B_n; throws when that exceeds the stage budget.
  int stage_for(const Vec& x) const {
    const int n = ex_.stage_of(x);
    if (n > max_stages_) throw BudgetExceeded("glue: point lies outside B_N, extend stages");
    return n;
  }

  Eval evaluate(const Vec& x, int order = 0) { return cvxglue::evaluate(stage_expr(stage_for(x)), x, order); }
  double value(const Vec& x) { return cvxglue::value(stage_expr(stage_for(x)), x); }

  Eval evaluate_at_stage(const Vec& x, int n, int order = 0) {
    if (!ex_.contains(n, x)) throw DomainError("glue: point is not in B_" + std::to_string(n));
    return cvxglue::evaluate(stage_expr(n), x, order);
  }

  json to_json() const {
    std::lock_guard<std::mutex> lock(state_->mu);
    json st = json::array();
    for (const auto& s : state_->stages) {
      if (s.empty) {
        st.push_back({{"n", s.n}, {"empty", true}});
        continue;
      }
      st.push_back({{"n", s.n},
                    {"upper", s.upper},
                    {"lower", s.lower},
                    {"shift", s.shift},
                    {"smoothing", s.smoothing},
                    {"piece", expr_to_json(s.piece)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"kind", "glued"},
            {"epsilon", epsilon_},
            {"approximator", approx_.name},
            {"max_stages", max_stages_},
            {"domain", domain_to_json(ex_.domain())},
            {"stages", st}};
  }

  /// Rebuilds the realized stages from JSON; no oracle, so no lazy extension.
  static GluedApproximant from_json(const json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion || j.value("kind", "") != "glued")
      throw SchemaError("glued approximant: expected schema_version 1 and kind \"glued\"");
    if (!j.contains("domain")) throw SchemaError("domain: missing");
    if (!j.contains("stages") || !j["stages"].is_array() || j["stages"].empty())
      throw SchemaError("stages: expected a nonempty array");
    const int realized = static_cast<int>(j["stages"].size());
    GluedApproximant g(nullptr, domain_from_json(j["domain"], "domain"), num_field(j, "epsilon", "glued"),
                       {j.value("approximator", std::string("loaded")), nullptr}, realized);
    for (int i = 0; i < realized; ++i) {
      const json& s = j["stages"][i];
      const std::string w = "stages[" + std::to_string(i) + "]";
      if (s.value("empty", false)) {
        StageRecord r;
        r.n = i + 1;
        r.empty = true;
        g.append(std::move(r));
        continue;
      }
      if (!s.contains("piece")) throw SchemaError(w + ".piece: missing");
      StageRecord r;
      r.n = i + 1;
      r.upper = num_field(s, "upper", w);
      r.lower = num_field(s, "lower", w);
      r.shift = num_field(s, "shift", w);
      r.smoothing = num_field(s, "smoothing", w);
      r.piece = expr_from_json(s["piece"]);
      g.append(std::move(r));
    }
    return g;
  }

 private:
  struct State {
    std::mutex mu;
    std::vector<StageRecord> stages;
  };

  // Joins onto the last nonempty stage; the level gap to it is at least the
  // gap to the immediately preceding stage.
  void append(StageRecord r) {
    const StageRecord* prev = nullptr;
    for (auto it = state_->stages.rbegin(); it != state_->stages.rend(); ++it)
      if (!it->empty) {
        prev = &*it;
        break;
      }
    if (r.empty) {
      // nothing to build
    } else if (!prev) {
      r.glued = r.piece;
    } else {
      r.glued = smooth_max(prev->glued, r.piece, Theta::poly(r.smoothing));
    }
    state_->stages.push_back(std::move(r));
  }

  void build_next() {
    if (!f_ || !approx_.build) throw BudgetExceeded("glue: loaded approximant cannot realize new stages");
    StageRecord r;
    r.n = static_cast<int>(state_->stages.size()) + 1;
    r.upper = margin_upper(epsilon_, r.n);
    r.lower = margin_lower(epsilon_, r.n);
    r.shift = level_shift(epsilon_, r.n);
    r.smoothing = smoothing_width(epsilon_, r.n);
    if (ex_.stage_empty(r.n)) {
      r.empty = true;
      append(std::move(r));
      return;
    }
    StageRequest req{r.n, ex_.stage_region(r.n), r.upper, r.lower};
    const Expr h = approx_.build(*f_, req);
    if (h.dim() != dim()) throw ContractViolation("glue: approximator returned the wrong dimension", r.n);
    r.piece = expr::shifted(h, -r.shift);
    if (opt_.check_contract) check_contract(r);
    append(std::move(r));
  }

  // f_n - a <= h_n on B_n, h_n <= f_n - b sampled on B_{2n}.
  void check_contract(const StageRecord& r) const {
    Rng rng = Rng(opt_.seed).split(static_cast<std::uint64_t>(r.n));
    auto sample = [&](int m, bool lower_side) {
      const Region reg = ex_.stage_region(m);
      int hits = 0;
      for (int t = 0; t < 200 * opt_.contract_samples && hits < opt_.contract_samples; ++t) {
        const Vec x = rng.uniform_box(reg.lo, reg.hi);
        if (!reg.contains(x)) continue;
        ++hits;
        const double fx = f_->value(x), h = cvxglue::value(r.piece, x);
        const double fn = fx - r.shift, slack = opt_.tol * (1.0 + std::abs(fx));
        if (lower_side && h < fn - r.upper - slack)
          throw ContractViolation("glue: stage " + std::to_string(r.n) + " piece too low on B_n", r.n);
        if (!lower_side && h > fn - r.lower + slack)
          throw ContractViolation("glue: stage " + std::to_string(r.n) + " piece above f_n - b", r.n);
      }
    };
    sample(r.n, true);
    sample(2 * r.n, false);
  }

  OraclePtr f_;
  Exhaustion ex_;
  double epsilon_;
  BoundedApproximator approx_;
  int max_stages_;
  GlueOptions opt_;
  std::shared_ptr<State> state_;
};

inline GluedApproximant glue(OraclePtr f, const DomainU& U, double epsilon, BoundedApproximator approx, int stages,
                             GlueOptions opt = {}) {
  return GluedApproximant(std::move(f), U, epsilon, std::move(approx), stages, opt);
}

}  // namespace cvxglue
