#include <catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "cvxglue/spec_io.hpp"

using namespace cvxglue;
using Catch::Approx;

namespace {

std::string spec_path(const std::string& name) { return std::string(CVXGLUE_SPECS_DIR) + "/" + name; }

std::string schema_message(const json& j, bool body = false) {
  try {
    if (body) body_spec_from_json(j);
    else run_spec_from_json(j);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("bundled function specs parse") {
  for (const char* name : {"abs_1d_strong.json", "abs_diff_2d_strong.json", "affine_2d.json", "exp_quad_1d.json",
                           "exp_quad_2d_shift.json", "huber_halfline.json"}) {
    INFO(name);
    CHECK_NOTHROW(run_spec_from_json(read_json_file(spec_path(name))));
  }
  // an indefinite quadratic form is refused while parsing
  try {
    run_spec_from_json(read_json_file(spec_path("nonconvex.json")));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("PSD") != std::string::npos);
  }
  const RunSpec h = run_spec_from_json(read_json_file(spec_path("huber_halfline.json")));
  CHECK_FALSE(h.f.oracle.domain.is_all_space());
  CHECK(h.f.oracle.domain.contains(Vec::Constant(1, -0.9)));
  CHECK_FALSE(h.f.oracle.domain.contains(Vec::Constant(1, -1.1)));
  const RunSpec s = run_spec_from_json(read_json_file(spec_path("exp_quad_2d_shift.json")));
  CHECK(s.approximator == "shift");
  REQUIRE(s.f.closed_form.has_value());
  const Vec x = make_vec({0.4, -0.3});
  CHECK(value(*s.f.closed_form, x) == Approx(s.f.oracle.value(x)).epsilon(1e-14));
}

TEST_CASE("bundled body specs parse") {
  const BodySpec d = body_spec_from_json(read_json_file(spec_path("disc.json")));
  CHECK(d.body.kind() == Body::Kind::Ball);
  CHECK(d.epsilon == 0.1);
  const BodySpec q = body_spec_from_json(read_json_file(spec_path("square_cap.json")));
  CHECK(q.body.kind() == Body::Kind::Intersection);
  CHECK(q.body.contains(make_vec({0.9, 0.0})));
  CHECK_FALSE(q.body.contains(make_vec({0.95, 0.95})));  // in the square, outside the ball
}

TEST_CASE("syntax errors carry line and column") {
  try {
    read_json_file(spec_path("malformed.json"));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("malformed.json:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_json_file(spec_path("does_not_exist.json")), SchemaError);
}

TEST_CASE("schema errors name the field") {
  json j = {{"schema_version", 1}, {"function", {{"family", "abs_comp"}, {"a", {1.0}}, {"colour", 2}}}};
  CHECK(schema_message(j).find("spec.function") != std::string::npos);
  CHECK(schema_message(j).find("colour") != std::string::npos);

  j = {{"schema_version", 1}, {"function", {{"family", "sum"}, {"terms", {{{"family", "nope"}}}}}}};
  CHECK(schema_message(j).find("spec.function.terms[0].family") != std::string::npos);

  j = {{"schema_version", 1}, {"function", {{"family", "abs_comp"}, {"a", {1.0}}}}, {"mode", "fast"}};
  CHECK(schema_message(j).find("spec.mode") != std::string::npos);

  j = {{"schema_version", 1}, {"function", {{"family", "abs_comp"}, {"a", {1.0}}}}, {"approximator", "shift"}};
  CHECK(schema_message(j).find("closed-form") != std::string::npos);

  j = {{"schema_version", 1}, {"function", {{"family", "huber"}, {"a", {1.0}}, {"delta", -1}}}};
  CHECK(schema_message(j).find("delta") != std::string::npos);

  j = {{"schema_version", 2}, {"function", {{"family", "abs_comp"}, {"a", {1.0}}}}};
  CHECK(schema_message(j).find("schema_version") != std::string::npos);
}

TEST_CASE("unsupported body representations are reported") {
  json j = {{"schema_version", 1}, {"body", {{"kind", "ellipsoid"}, {"Q", {{1, 0}, {0, 1}}}}}};
  const std::string msg = schema_message(j, true);
  CHECK(msg.find("spec.body.kind") != std::string::npos);
  CHECK(msg.find("ellipsoid") != std::string::npos);
  j = {{"schema_version", 1}, {"body", {{"kind", "ball"}, {"center", {0, 0}}, {"radius", 0}}}};
  CHECK(schema_message(j, true).find("radius") != std::string::npos);
}

TEST_CASE("backend names") {
  CHECK(backend_from_string("poly") == ThetaBackend::Poly);
  CHECK(backend_from_string("gauss") == ThetaBackend::Gauss);
  CHECK_THROWS_AS(backend_from_string("cubic"), SchemaError);
}
