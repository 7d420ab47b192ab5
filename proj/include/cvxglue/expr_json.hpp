#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "cvxglue/expr.hpp"

namespace cvxglue {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Row-major nested arrays.
inline json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

inline Vec vec_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw SchemaError(field + ": expected an array of numbers");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(field + "[" + std::to_string(i) + "]: expected a number");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline Mat mat_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw SchemaError(field + ": expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != cols) throw SchemaError(f + ": rows must have equal length");
    m.row(i) = vec_from_json(j[i], f).transpose();
  }
  return m;
}

inline double num_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) throw SchemaError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline json to_json(const Theta& th) {
  json j{{"backend", to_string(th.backend())}, {"epsilon", th.epsilon()}};
  if (th.backend() == ThetaBackend::Poly) j["k"] = th.k();
  return j;
}

inline Theta theta_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  const std::string b = j.value("backend", "");
  const double eps = num_field(j, "epsilon", where);
  if (b == "poly") return Theta::poly(eps, j.value("k", 4));
  if (b == "gauss") return Theta::gauss(eps);
  throw SchemaError(where + ".backend: expected \"poly\" or \"gauss\"");
}

namespace detail {

inline json node_to_json(const Node& n);

inline json expr_body(const Expr& e) { return node_to_json(e.node()); }

inline json node_to_json(const Node& node) {
  return std::visit(
      [](const auto& n) -> json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AffineNode>) {
          return {{"kind", "affine"}, {"w", to_json(n.w)}, {"b", n.b}};
        } else if constexpr (std::is_same_v<T, MaxOfAffineNode>) {
          return {{"kind", "max_of_affine"}, {"W", to_json(n.W)}, {"b", to_json(n.b)}};
        } else if constexpr (std::is_same_v<T, SmoothMaxNode>) {
          return {{"kind", "smooth_max"}, {"theta", to_json(n.theta)}, {"left", expr_body(n.left)},
                  {"right", expr_body(n.right)}};
        } else if constexpr (std::is_same_v<T, NestedSmoothMaxNode>) {
          json p = json::array();
          for (const auto& e : n.pieces) p.push_back(expr_body(e));
          return {{"kind", "nested_smooth_max"}, {"theta", to_json(n.theta)}, {"pieces", p}};
        } else if constexpr (std::is_same_v<T, GaussRampNode>) {
          return {{"kind", "gauss_ramp"}, {"w", to_json(n.w)}, {"b", n.b}, {"variance", n.variance}};
        } else if constexpr (std::is_same_v<T, AffinePrecomposeNode>) {
          return {{"kind", "affine_precompose"}, {"A", to_json(n.A)}, {"c", to_json(n.c)}, {"inner", expr_body(n.inner)}};
        } else if constexpr (std::is_same_v<T, PullbackNode>) {
          return {{"kind", "pullback"}, {"P", to_json(n.P)},       {"ell_w", to_json(n.ell_w)},
                  {"ell_b", n.ell_b},   {"inner", expr_body(n.inner)}};
        } else if constexpr (std::is_same_v<T, SumNode>) {
          json t = json::array();
          for (const auto& e : n.terms) t.push_back(expr_body(e));
          return {{"kind", "sum"}, {"terms", t}};
        } else if constexpr (std::is_same_v<T, NonNegScaleNode>) {
          return {{"kind", "nonneg_scale"}, {"lambda", n.lambda}, {"inner", expr_body(n.inner)}};
        } else if constexpr (std::is_same_v<T, QuadFormNode>) {
          return {{"kind", "quad_form"}, {"Q", to_json(n.Q)}, {"w", to_json(n.w)}, {"b", n.b}};
        } else if constexpr (std::is_same_v<T, ExpAffineNode>) {
          return {{"kind", "exp_affine"}, {"w", to_json(n.w)}, {"b", n.b}, {"scale", n.scale}};
        } else {
          throw SchemaError("mollified_oracle: oracle-backed nodes are not serializable");
        }
      },
      node.v);
}

inline Expr expr_from_json_at(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw SchemaError(where + ": expected an object with a string \"kind\"");
  const std::string kind = j["kind"];
  auto sub = [&](const char* key) {
    if (!j.contains(key)) throw SchemaError(where + "." + key + ": missing");
    return expr_from_json_at(j[key], where + "." + key);
  };
  auto list = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) throw SchemaError(where + "." + key + ": expected an array");
    std::vector<Expr> out;
    for (std::size_t i = 0; i < j[key].size(); ++i)
      out.push_back(expr_from_json_at(j[key][i], where + "." + key + "[" + std::to_string(i) + "]"));
    return out;
  };
  auto vec = [&](const char* key) {
    if (!j.contains(key)) throw SchemaError(where + "." + key + ": missing");
    return vec_from_json(j[key], where + "." + key);
  };
  auto mat = [&](const char* key) {
    if (!j.contains(key)) throw SchemaError(where + "." + key + ": missing");
    return mat_from_json(j[key], where + "." + key);
  };
  auto theta = [&]() {
    if (!j.contains("theta")) throw SchemaError(where + ".theta: missing");
    return theta_from_json(j["theta"], where + ".theta");
  };
  try {
    if (kind == "affine") return expr::affine(vec("w"), num_field(j, "b", where));
    if (kind == "max_of_affine") return expr::max_of_affine(mat("W"), vec("b"));
    if (kind == "smooth_max") return expr::smooth_max_node(sub("left"), sub("right"), theta());
    if (kind == "nested_smooth_max") return expr::nested_smooth_max_node(list("pieces"), theta());
    if (kind == "gauss_ramp") return expr::gauss_ramp(vec("w"), num_field(j, "b", where), num_field(j, "variance", where));
    if (kind == "affine_precompose") return expr::affine_precompose(mat("A"), vec("c"), sub("inner"));
    if (kind == "pullback") return expr::pullback(mat("P"), vec("ell_w"), num_field(j, "ell_b", where), sub("inner"));
    if (kind == "sum") return expr::sum(list("terms"));
    if (kind == "nonneg_scale") return expr::scale(num_field(j, "lambda", where), sub("inner"));
    if (kind == "quad_form") return expr::quad_form(mat("Q"), vec("w"), num_field(j, "b", where));
    if (kind == "exp_affine") return expr::exp_affine(vec("w"), num_field(j, "b", where), num_field(j, "scale", where));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
  throw SchemaError(where + ".kind: unknown node kind \"" + kind + "\"");
}

}  // namespace detail

/// {"schema_version": 1, "dim": n, "expr": {...}}. Doubles round-trip exactly.
inline json expr_to_json(const Expr& e) {
  return {{"schema_version", kSchemaVersion}, {"dim", e.dim()}, {"expr", detail::expr_body(e)}};
}

inline Expr expr_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("expression document: expected an object");
  if (j.value("schema_version", 0) != kSchemaVersion) throw SchemaError("schema_version: expected 1");
  if (!j.contains("expr")) throw SchemaError("expr: missing");
  return detail::expr_from_json_at(j["expr"], "expr");
}

}  // namespace cvxglue

#include "cvxglue/domain.hpp"

namespace cvxglue {

inline json domain_to_json(const DomainU& U) {
  json j{{"dim", U.dim()}};
  if (U.is_all_space()) {
    j["kind"] = "all_space";
    return j;
  }
  j["kind"] = "intersection";
  json hs = json::array();
  for (const auto& h : U.halfspaces()) hs.push_back({{"a", to_json(h.a)}, {"b", h.b}});
  j["halfspaces"] = hs;
  if (U.ball()) j["ball"] = {{"center", to_json(U.ball()->center)}, {"radius", U.ball()->radius}};
  return j;
}

inline DomainU domain_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  if (!j.contains("dim") || !j["dim"].is_number_integer()) throw SchemaError(where + ".dim: expected an integer");
  const int n = j["dim"];
  const std::string kind = j.value("kind", "all_space");
  try {
    if (kind == "all_space") return DomainU::all_space(n);
    if (kind != "intersection") throw SchemaError(where + ".kind: expected \"all_space\" or \"intersection\"");
    std::vector<HalfSpace> hs;
    if (j.contains("halfspaces")) {
      if (!j["halfspaces"].is_array()) throw SchemaError(where + ".halfspaces: expected an array");
      for (std::size_t i = 0; i < j["halfspaces"].size(); ++i) {
        const std::string w = where + ".halfspaces[" + std::to_string(i) + "]";
        const json& h = j["halfspaces"][i];
        if (!h.is_object() || !h.contains("a")) throw SchemaError(w + ".a: missing");
        hs.push_back({vec_from_json(h["a"], w + ".a"), num_field(h, "b", w)});
      }
    }
    std::optional<Ball> ball;
    if (j.contains("ball")) {
      const json& b = j["ball"];
      if (!b.is_object() || !b.contains("center")) throw SchemaError(where + ".ball.center: missing");
      ball = Ball{vec_from_json(b["center"], where + ".ball.center"), num_field(b, "radius", where + ".ball")};
    }
    return DomainU::intersection(n, std::move(hs), std::move(ball));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

}  // namespace cvxglue
