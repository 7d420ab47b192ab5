// cvxglue command line: approx, classify, verify, body, demo.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "cvxglue/cvxglue.hpp"

namespace fs = std::filesystem;
using namespace cvxglue;

namespace {

constexpr int kExitPass = 0, kExitFail = 1, kExitUsage = 2;

struct Flags {
  std::optional<double> epsilon;
  std::optional<std::string> backend;
  std::optional<int> poly_k;
  std::optional<int> stages;
  std::optional<double> radius;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<double> tol;
  std::string out_dir = "cvxglue_out";
};

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

fs::path out_dir(const Flags& fl) {
  fs::path d(fl.out_dir);
  fs::create_directories(d);
  return d;
}

void apply(const Flags& fl, RunSpec& s) {
  if (fl.epsilon) s.epsilon = *fl.epsilon;
  if (fl.backend) s.backend = backend_from_string(*fl.backend);
  if (fl.poly_k) s.poly_k = *fl.poly_k;
  if (fl.stages) s.stages = *fl.stages;
  if (fl.radius) s.radius = *fl.radius;
  if (fl.seed) s.seed = *fl.seed;
  if (fl.samples) s.samples = *fl.samples;
  if (fl.tol) s.tol = *fl.tol;
  if (!(s.epsilon > 0.0)) throw SchemaError("--epsilon: must be positive");
  if (!(s.radius > 0.0)) throw SchemaError("--radius: must be positive");
  if (s.samples < 1) throw SchemaError("--samples: must be positive");
}

// Stages so that the growth audit at 4R stays inside B_N.
int stages_for(const RunSpec& s) {
  if (s.stages > 0) return s.stages;
  return static_cast<int>(std::floor(4.0 * s.radius)) + 2;
}

// Ball of radius R inside U, restricted to the points g covers.
Region verify_region(const DomainU& U, double R, const GlobalApproximation* g = nullptr) {
  Region r = Region::ball(Vec::Zero(U.dim()), R);
  auto in_ball = r.contains;
  r.contains = [U, in_ball, g](const Vec& x) { return in_ball(x) && U.contains(x) && (!g || g->covers(x)); };
  return r;
}

json spec_echo(const RunSpec& s, int stages) {
  return {{"family", s.f.oracle.name},     {"dim", s.f.oracle.dim()},   {"epsilon", s.epsilon},
          {"backend", to_string(s.backend)}, {"poly_k", s.poly_k},        {"mode", s.mode},
          {"approximator", s.approximator},  {"stages", stages},          {"radius", s.radius},
          {"seed", s.seed},                  {"samples", s.samples},      {"tol", s.tol}};
}

// Pass criteria for an approximant g of f: band, convexity, Lipschitz bound
// when f knows one, and the growth audit on all of R^n.
VerifyReport verify_approximant(const RunSpec& s, const GlobalApproximation& g, double band, bool strong) {
  const ConvexOracle& f = s.f.oracle;
  const DomainU& U = f.domain;
  const double R = std::min(s.radius, g.coverage_radius() - 1e-9);
  const Region reg = verify_region(U, R, &g);
  auto fv = [&f](const Vec& x) { return f.value(x); };
  auto gv = [&g](const Vec& x) { return g.value(x); };
  VerifyReport rep;
  // Absolute tolerances scale with the size of f on the region.
  double fmax = 1.0;
  {
    Rng rng(s.seed ^ 0x51);
    for (int i = 0; i < 256; ++i) fmax = std::max(fmax, std::abs(fv(detail::sample_in(reg, rng))));
  }
  const double atol = s.tol * fmax;
  rep.checks.push_back(check_sandwich(fv, gv, reg, band, s.samples, atol, s.seed + 1));
  rep.checks.push_back(check_convexity(gv, reg, s.samples, std::max(1e-10, 1e-3 * atol), s.seed + 2));
  if (f.lipschitz) {
    const Region wide = verify_region(U, std::min((1.0 + s.epsilon) * R, g.coverage_radius() - 1e-9), &g);
    rep.checks.push_back(check_lipschitz(gv, reg, f.lipschitz(wide), s.samples, 1e-6, s.seed + 3));
  }
  if (U.is_all_space() && 4.0 * s.radius < g.coverage_radius())
    rep.checks.push_back(growth_audit(fv, gv, U.dim(), s.radius, band + atol, 64, s.seed + 4));
  if (strong) {
    CheckReport sc = check_strong_convexity(gv, reg, 1000, 1e-3, s.seed + 5);
    // Reported, not gated: far from the corners the curvature is below double precision.
    sc.details["informational"] = true;
    sc.pass = true;
    rep.checks.push_back(sc);
  }
  return rep;
}

void write_grid(const fs::path& p, const RunSpec& s, const GlobalApproximation& g) {
  const ConvexOracle& f = s.f.oracle;
  const int n = f.dim(), m = std::max(2, s.grid_points);
  const double R = std::min(s.radius, g.coverage_radius() - 1e-9);
  std::string out;
  for (int i = 0; i < std::min(n, 2); ++i) out += "x" + std::to_string(i) + ",";
  out += "f,g,gap\n";
  auto row = [&](const Vec& x) {
    if (!f.domain.contains(x) || !g.covers(x)) return;
    const double fx = f.value(x), gx = g.value(x);
    for (int i = 0; i < std::min(n, 2); ++i) out += num(x(i)) + ",";
    out += num(fx) + "," + num(gx) + "," + num(fx - gx) + "\n";
  };
  auto coord = [&](int i) { return -R + 2.0 * R * i / (m - 1); };
  if (n == 2) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) row(make_vec({coord(i), coord(j)}));
  } else {
    for (int i = 0; i < m; ++i) {
      Vec x = Vec::Zero(n);
      x(0) = coord(i);
      row(x);
    }
  }
  write_text(p, out);
}

int finish(const fs::path& dir, const std::string& stem, const json& report, const std::string& text, bool pass) {
  write_json(dir / (stem + ".json"), report);
  write_text(dir / (stem + ".txt"), text);
  std::cout << text;
  return pass ? kExitPass : kExitFail;
}

int cmd_approx(const std::string& spec_path, const Flags& fl) {
  RunSpec s = run_spec_from_json(read_json_file(spec_path));
  apply(fl, s);
  auto f = std::make_shared<const ConvexOracle>(s.f.oracle);
  const int N = stages_for(s);

  // Refuse non-convex input before building anything.
  {
    const Region reg = verify_region(f->domain, s.radius);
    Rng rng(s.seed);
    const double scale = 1.0 + std::abs(f->value(detail::sample_in(reg, rng)));
    const CheckReport c =
        check_convexity([&](const Vec& x) { return f->value(x); }, reg, s.samples, 1e-9 * scale, s.seed);
    if (!c.pass) {
      std::cerr << "error: spec refused, convexity sampler found violation " << c.metric << "\n";
      return kExitUsage;
    }
  }

  json classification;
  std::optional<GlobalApproximation> g;
  double band = 2.0 * s.epsilon;
  bool strong = false;
  if (s.mode == "strongly_convex") {
    StrongApproxOptions opt;
    opt.stages = N;
    opt.factor.seed = s.seed;
    opt.factor.tol = 1e-8;
    auto res = strongly_convex_global_approx(f, s.epsilon, opt);
    classification = {{"class", to_string(res.classification.kind)}};
    if (res.classification.factorization) classification["factorization"] = to_json(*res.classification.factorization);
    strong = res.classification.kind == StrongApproxClass::Approximable;
    band = s.epsilon;
    g = std::move(res.approximation);
  } else {
    BoundedApproximator approx = s.approximator == "shift" ? shift_approximator(*s.f.closed_form)
                                                           : hyperplane_approximator(s.backend, s.poly_k);
    g = smooth_global_approx(f, s.epsilon, std::move(approx), N);
  }
  const VerifyReport rep = verify_approximant(s, *g, band, strong);

  const fs::path dir = out_dir(fl);
  json aj = g->to_json();
  write_json(dir / "approximant.json", aj);
  write_grid(dir / "grid.csv", s, *g);
  json report = rep.to_json();
  report["spec"] = spec_echo(s, N);
  report["band"] = band;
  if (!classification.is_null()) report["classification"] = classification;
  std::string text = "mode " + s.mode + ", epsilon " + num(s.epsilon) + ", stages " + std::to_string(N) + "\n";
  if (!classification.is_null()) text += "classification " + classification["class"].get<std::string>() + "\n";
  text += rep.to_text();
  return finish(dir, "report", report, text, rep.pass());
}

int cmd_classify(const std::string& spec_path, const Flags& fl) {
  RunSpec s = run_spec_from_json(read_json_file(spec_path));
  apply(fl, s);
  FactorizationOptions opt;
  opt.seed = s.seed;
  if (fl.tol) opt.tol = *fl.tol;
  if (fl.samples) opt.samples = *fl.samples;
  const Classification c = classify_strong_approx(std::make_shared<const ConvexOracle>(s.f.oracle), opt);
  json report{{"schema_version", kSchemaVersion}, {"class", to_string(c.kind)}, {"svd_tol", opt.tol}};
  std::string text = "class " + to_string(c.kind);
  if (c.factorization) {
    report["factorization"] = to_json(*c.factorization);
    text += ", k=" + std::to_string(c.factorization->k);
  }
  text += "\n";
  return finish(out_dir(fl), "classify", report, text, true);
}

int cmd_verify(const std::string& approx_path, const std::string& spec_path, const Flags& fl) {
  RunSpec s = run_spec_from_json(read_json_file(spec_path));
  apply(fl, s);
  const GlobalApproximation g = GlobalApproximation::from_json(read_json_file(approx_path));
  const double band = s.mode == "strongly_convex" ? s.epsilon : 2.0 * s.epsilon;
  const VerifyReport rep = verify_approximant(s, g, band, false);
  json report = rep.to_json();
  report["band"] = band;
  return finish(out_dir(fl), "verify", report, rep.to_text(), rep.pass());
}

int cmd_body(const std::string& spec_path, const Flags& fl) {
  BodySpec s = body_spec_from_json(read_json_file(spec_path));
  if (fl.epsilon) s.epsilon = *fl.epsilon;
  if (fl.stages) s.stages = *fl.stages;
  if (fl.radius) s.radius = *fl.radius;
  if (fl.seed) s.seed = *fl.seed;
  if (fl.samples) s.samples = *fl.samples;
  SmoothBodyOptions opt;
  opt.stages = s.stages > 0 ? s.stages : static_cast<int>(std::floor(s.radius * std::sqrt(s.body.dim()))) + 2;
  const SmoothBody D = smooth_body(s.body, s.epsilon, opt);
  const int n = s.body.dim();
  const VerifyReport rep =
      check_body(D, Region::box(Vec::Constant(n, -s.radius), Vec::Constant(n, s.radius)), s.samples, 1e-3, 1e-3, s.seed);
  const fs::path dir = out_dir(fl);
  write_json(dir / "body_g.json", D.g.to_json());
  json report = rep.to_json();
  report["body"] = s.body.to_json();
  report["epsilon"] = s.epsilon;
  report["stages"] = opt.stages;
  return finish(dir, "body", report, rep.to_text(), rep.pass());
}

int cmd_demo(const std::string& name, const Flags& fl) {
  const std::uint64_t seed = fl.seed.value_or(7);
  const DemoReport r = name == "epigraph" ? epigraph_demo(fl.epsilon.value_or(0.1)) : counterexample_demo(name, seed);
  std::string text = r.name + " " + (r.pass ? "PASS" : "FAIL") + "  quantity=" + num(r.quantity) +
                     "  threshold=" + num(r.threshold) + "\n" + r.note + "\n";
  return finish(out_dir(fl), "demo_" + name, r.to_json(), text, r.pass);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth convex approximation toolkit"};
  app.require_subcommand(1);
  Flags fl;
  double eps = 0.1, radius = 50.0, tol = 1e-9;
  std::string backend = "poly";
  int poly_k = 4, stages = 0, samples = 2000;
  std::uint64_t seed = 1;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--epsilon", eps, "approximation budget (spec value, default 0.1)");
    c->add_option("--backend", backend, "smooth max profile: poly or gauss (default poly)")
        ->check(CLI::IsMember({"poly", "gauss"}));
    c->add_option("--poly-k", poly_k, "mollifier exponent of the poly profile (default 4)")->check(CLI::Range(2, 12));
    c->add_option("--stages", stages, "gluing stages N (default floor(4R) + 2)")->check(CLI::PositiveNumber);
    c->add_option("--radius", radius, "verification radius R (default 50; growth audit at R, 2R, 4R)");
    c->add_option("--seed", seed, "PRNG seed (default 1)");
    c->add_option("--samples", samples, "samples per sampled check (default 2000)")->check(CLI::PositiveNumber);
    c->add_option("--tol", tol, "relative tolerance of sampled checks (default 1e-9)");
    c->add_option("--out-dir", fl.out_dir, "output directory (default cvxglue_out)");
  };
  std::string spec, approx, demo;
  auto* a = app.add_subcommand("approx", "build an approximant and verify it");
  a->add_option("spec", spec, "function spec JSON")->required();
  add_common(a);
  auto* c = app.add_subcommand("classify", "strong-approximability classification");
  c->add_option("spec", spec, "function spec JSON")->required();
  add_common(c);
  auto* v = app.add_subcommand("verify", "re-verify a saved approximant against its spec");
  v->add_option("approximant", approx, "approximant JSON")->required();
  v->add_option("spec", spec, "function spec JSON")->required();
  add_common(v);
  auto* b = app.add_subcommand("body", "smooth a convex body");
  b->add_option("spec", spec, "body spec JSON")->required();
  add_common(b);
  auto* d = app.add_subcommand("demo", "counterexample demos");
  d->add_option("name", demo, "ex7_1, ex7_2, ex7_3 or epigraph")
      ->required()
      ->check(CLI::IsMember({"ex7_1", "ex7_2", "ex7_3", "epigraph"}));
  add_common(d);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--epsilon")) fl.epsilon = eps;
  if (given("--backend")) fl.backend = backend;
  if (given("--poly-k")) fl.poly_k = poly_k;
  if (given("--stages")) fl.stages = stages;
  if (given("--radius")) fl.radius = radius;
  if (given("--seed")) fl.seed = seed;
  if (given("--samples")) fl.samples = samples;
  if (given("--tol")) fl.tol = tol;

  try {
    if (sub == a) return cmd_approx(spec, fl);
    if (sub == c) return cmd_classify(spec, fl);
    if (sub == v) return cmd_verify(approx, spec, fl);
    if (sub == b) return cmd_body(spec, fl);
    return cmd_demo(demo, fl);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
