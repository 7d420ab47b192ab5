#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cvxglue/bodies.hpp"
#include "cvxglue/expr_json.hpp"
#include "cvxglue/oracle.hpp"

namespace cvxglue {

/// A built-in convex family instance, with a closed-form expression when the
/// family is smooth and expressible.
struct FunctionSpec {
  ConvexOracle oracle;
  std::optional<Expr> closed_form;
};

struct RunSpec {
  FunctionSpec f;
  double epsilon = 0.1;
  ThetaBackend backend = ThetaBackend::Poly;
  int poly_k = 4;
  std::string mode = "smooth";
  std::string approximator = "hyperplane";
  int stages = 0;  // 0: derived from the radius
  double radius = 50.0;
  std::uint64_t seed = 1;
  int samples = 2000;
  double tol = 1e-9;
  int grid_points = 101;
};

struct BodySpec {
  Body body;
  double epsilon = 0.1;
  int stages = 0;
  double radius = 2.0;
  std::uint64_t seed = 1;
  int samples = 10000;
};

/// Parses JSON text; syntax errors become SchemaError with line and column.
inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error");
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(where + "." + key + ": missing");
  return j[key];
}

inline double num_or(const json& j, const char* key, double dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) throw SchemaError(where + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline int int_or(const json& j, const char* key, int dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number_integer()) throw SchemaError(where + "." + key + ": expected an integer");
  return j[key].get<int>();
}

inline std::string str_or(const json& j, const char* key, const std::string& dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_string()) throw SchemaError(where + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

inline void known_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw SchemaError(where + "." + it.key() + ": unknown field");
  }
}

inline ThetaBackend backend_from(const std::string& s, const std::string& where) {
  if (s == "poly") return ThetaBackend::Poly;
  if (s == "gauss") return ThetaBackend::Gauss;
  throw SchemaError(where + ": expected \"poly\" or \"gauss\"");
}

}  // namespace detail

inline ThetaBackend backend_from_string(const std::string& s) { return detail::backend_from(s, "backend"); }

/// Function spec: {"family": ..., parameters}. Families: max_affine {W, b},
/// quadform {Q, w, b}, abs_comp {a, c, scale}, exp_dir {a, c, scale},
/// huber {a, c, delta}, pow_abs {a, c, p}, affine {w, b}, sum {terms},
/// scale {lambda, inner}, pullback {P, w, b, inner}.
inline FunctionSpec function_from_json(const json& j, const std::string& where = "function") {
  using namespace detail;
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  const std::string fam = str_or(j, "family", "", where);
  try {
    if (fam == "max_affine") {
      known_keys(j, {"family", "W", "b"}, where);
      return {family::max_affine(mat_from_json(field(j, "W", where), where + ".W"),
                                 vec_from_json(field(j, "b", where), where + ".b")),
              std::nullopt};
    }
    if (fam == "quadform") {
      known_keys(j, {"family", "Q", "w", "b"}, where);
      const Mat Q = mat_from_json(field(j, "Q", where), where + ".Q");
      const Vec w = j.contains("w") ? vec_from_json(j["w"], where + ".w") : Vec(Vec::Zero(Q.cols()));
      const double b = num_or(j, "b", 0.0, where);
      return {family::quadform(Q, w, b), expr::quad_form(Q, w, b)};
    }
    if (fam == "abs_comp" || fam == "exp_dir") {
      known_keys(j, {"family", "a", "c", "scale"}, where);
      const Vec a = vec_from_json(field(j, "a", where), where + ".a");
      const double c = num_or(j, "c", 0.0, where), s = num_or(j, "scale", 1.0, where);
      if (fam == "abs_comp") return {family::abs_comp(a, c, s), std::nullopt};
      return {family::exp_dir(a, c, s), expr::exp_affine(a, c, s)};
    }
    if (fam == "huber") {
      known_keys(j, {"family", "a", "c", "delta"}, where);
      return {family::huber(vec_from_json(field(j, "a", where), where + ".a"), num_or(j, "c", 0.0, where),
                            num_field(j, "delta", where)),
              std::nullopt};
    }
    if (fam == "pow_abs") {
      known_keys(j, {"family", "a", "c", "p"}, where);
      return {family::pow_abs(vec_from_json(field(j, "a", where), where + ".a"), num_or(j, "c", 0.0, where),
                              num_field(j, "p", where)),
              std::nullopt};
    }
    if (fam == "affine") {
      known_keys(j, {"family", "w", "b"}, where);
      const Vec w = vec_from_json(field(j, "w", where), where + ".w");
      const double b = num_or(j, "b", 0.0, where);
      return {family::affine(w, b), expr::affine(w, b)};
    }
    if (fam == "sum") {
      known_keys(j, {"family", "terms"}, where);
      const json& t = field(j, "terms", where);
      if (!t.is_array() || t.empty()) throw SchemaError(where + ".terms: expected a nonempty array");
      std::vector<ConvexOracle> os;
      std::vector<Expr> es;
      bool closed = true;
      for (std::size_t i = 0; i < t.size(); ++i) {
        FunctionSpec s = function_from_json(t[i], where + ".terms[" + std::to_string(i) + "]");
        closed = closed && s.closed_form.has_value();
        if (s.closed_form) es.push_back(*s.closed_form);
        os.push_back(std::move(s.oracle));
      }
      FunctionSpec out{family::sum(std::move(os)), std::nullopt};
      if (closed) out.closed_form = expr::sum(std::move(es));
      return out;
    }
    if (fam == "scale") {
      known_keys(j, {"family", "lambda", "inner"}, where);
      const double lambda = num_field(j, "lambda", where);
      FunctionSpec in = function_from_json(field(j, "inner", where), where + ".inner");
      FunctionSpec out{family::scale(lambda, std::move(in.oracle)), std::nullopt};
      if (in.closed_form) out.closed_form = expr::scale(lambda, *in.closed_form);
      return out;
    }
    if (fam == "pullback") {
      known_keys(j, {"family", "P", "w", "b", "inner"}, where);
      const Mat P = mat_from_json(field(j, "P", where), where + ".P");
      const Vec w = j.contains("w") ? vec_from_json(j["w"], where + ".w") : Vec(Vec::Zero(P.cols()));
      const double b = num_or(j, "b", 0.0, where);
      FunctionSpec in = function_from_json(field(j, "inner", where), where + ".inner");
      FunctionSpec out{family::pullback(P, w, b, std::move(in.oracle)), std::nullopt};
      if (in.closed_form) out.closed_form = expr::pullback(P, w, b, *in.closed_form);
      return out;
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw SchemaError(where + ": " + e.what());
  }
  throw SchemaError(where + ".family: unknown family '" + fam +
                    "' (max_affine, quadform, abs_comp, exp_dir, huber, pow_abs, affine, sum, scale, pullback)");
}

/// {"schema_version": 1, "function": {...}, "domain": {...}?, "epsilon", "backend",
///  "poly_k", "mode", "approximator", "stages", "radius", "seed", "samples", "tol", "grid_points"}
inline RunSpec run_spec_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("spec: expected an object");
  known_keys(j, {"schema_version", "function", "domain", "epsilon", "backend", "poly_k", "mode", "approximator",
                 "stages", "radius", "seed", "samples", "tol", "grid_points"},
             "spec");
  if (int_or(j, "schema_version", kSchemaVersion, "spec") != kSchemaVersion)
    throw SchemaError("spec.schema_version: expected 1");
  RunSpec s;
  s.f = function_from_json(field(j, "function", "spec"), "spec.function");
  if (j.contains("domain")) {
    DomainU U = domain_from_json(j["domain"], "spec.domain");
    if (U.dim() != s.f.oracle.dim()) throw SchemaError("spec.domain: dimension differs from the function");
    s.f.oracle.domain = std::move(U);
  }
  s.epsilon = num_or(j, "epsilon", s.epsilon, "spec");
  if (!(s.epsilon > 0.0)) throw SchemaError("spec.epsilon: must be positive");
  s.backend = backend_from(str_or(j, "backend", "poly", "spec"), "spec.backend");
  s.poly_k = int_or(j, "poly_k", s.poly_k, "spec");
  s.mode = str_or(j, "mode", s.mode, "spec");
  if (s.mode != "smooth" && s.mode != "strongly_convex")
    throw SchemaError("spec.mode: expected \"smooth\" or \"strongly_convex\"");
  s.approximator = str_or(j, "approximator", s.approximator, "spec");
  if (s.approximator != "hyperplane" && s.approximator != "shift")
    throw SchemaError("spec.approximator: expected \"hyperplane\" or \"shift\"");
  if (s.approximator == "shift" && !s.f.closed_form)
    throw SchemaError("spec.approximator: \"shift\" needs a smooth closed-form family (quadform, exp_dir, affine)");
  s.stages = int_or(j, "stages", s.stages, "spec");
  s.radius = num_or(j, "radius", s.radius, "spec");
  s.seed = static_cast<std::uint64_t>(int_or(j, "seed", static_cast<int>(s.seed), "spec"));
  s.samples = int_or(j, "samples", s.samples, "spec");
  s.tol = num_or(j, "tol", s.tol, "spec");
  s.grid_points = int_or(j, "grid_points", s.grid_points, "spec");
  return s;
}

/// {"kind": "ball", center, radius} | {"kind": "polytope", A, b} |
/// {"kind": "intersection", polytope: {...}, ball: {...}}
inline Body body_from_json(const json& j, const std::string& where = "body") {
  using namespace detail;
  const std::string kind = str_or(j, "kind", "", where);
  try {
    if (kind == "ball") {
      known_keys(j, {"kind", "center", "radius"}, where);
      return Body::ball(vec_from_json(field(j, "center", where), where + ".center"), num_field(j, "radius", where));
    }
    if (kind == "polytope") {
      known_keys(j, {"kind", "A", "b"}, where);
      const Mat A = mat_from_json(field(j, "A", where), where + ".A");
      const Vec b = vec_from_json(field(j, "b", where), where + ".b");
      return Body::polytope(A, b);
    }
    if (kind == "intersection") {
      known_keys(j, {"kind", "polytope", "ball"}, where);
      Body P = body_from_json(field(j, "polytope", where), where + ".polytope");
      Body B = body_from_json(field(j, "ball", where), where + ".ball");
      return Body::intersection(P, B);
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw SchemaError(where + ": " + e.what());
  }
  throw SchemaError(where + ".kind: unsupported body representation '" + kind +
                    "' (ball, polytope, intersection)");
}

inline BodySpec body_spec_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("spec: expected an object");
  known_keys(j, {"schema_version", "body", "epsilon", "stages", "radius", "seed", "samples"}, "spec");
  if (int_or(j, "schema_version", kSchemaVersion, "spec") != kSchemaVersion)
    throw SchemaError("spec.schema_version: expected 1");
  BodySpec s;
  s.body = body_from_json(field(j, "body", "spec"), "spec.body");
  s.epsilon = num_or(j, "epsilon", s.epsilon, "spec");
  if (!(s.epsilon > 0.0)) throw SchemaError("spec.epsilon: must be positive");
  s.stages = int_or(j, "stages", s.stages, "spec");
  s.radius = num_or(j, "radius", s.radius, "spec");
  s.seed = static_cast<std::uint64_t>(int_or(j, "seed", static_cast<int>(s.seed), "spec"));
  s.samples = int_or(j, "samples", s.samples, "spec");
  return s;
}

}  // namespace cvxglue
