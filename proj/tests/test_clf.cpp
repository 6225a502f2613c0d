#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lyap/catalog.hpp"
#include "lyap/clf.hpp"

using namespace lyap;

namespace {

ScalarCertificate cert(const std::string& body, int n = 2) {
  ScalarCertificate c;
  c.n = n;
  c.name = "V";
  c.body = parse_expression(body, {n, 0});
  return c;
}

SamplePlan plan(int dim) {
  SamplePlan p;
  p.dim = dim;
  p.radial = 40;
  p.angular = 40;
  p.total = 1600;
  return p;
}

}  // namespace

TEST_CASE("lie derivative hand values", "[clf]") {
  const auto v = cert("0.5*(x1^2+x2^2)");
  std::vector<Expr> inward = {parse_expression("-x1", {2, 0}), parse_expression("-x2", {2, 0})};
  CHECK(lie_derivative(v, inward, Vec{1.0, 1.0}) == Catch::Approx(-2.0));

  const auto v1 = cert("0.5*x1^2", 1);
  std::vector<Expr> cubic = {parse_expression("x1^3", {1, 0})};
  CHECK(lie_derivative(v1, cubic, Vec{2.0}) == Catch::Approx(16.0));

  std::vector<Expr> zero = {parse_expression("0", {2, 0}), parse_expression("0", {2, 0})};
  CHECK(lie_derivative(v, zero, Vec{0.3, -0.7}) == 0.0);
}

TEST_CASE("sontag feedback matches the closed form on the cubic system", "[clf]") {
  const auto& e = catalog_get("cubic_scalar");
  FeedbackLaw law = sontag_feedback(e.system, e.certificates[0], plan(1));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    double x = u(rng);
    if (std::abs(x) < 1e-3) x = 1e-3;
    const double expected = -x * x * x - x * std::sqrt(x * x * x * x + 1.0);
    const double got = law(Vec{x});
    REQUIRE(std::abs(got - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("sontag feedback scalar example", "[clf]") {
  SystemDef s;
  s.n = 1;
  s.m = 1;
  s.drift = {parse_expression("-x1", {1, 1})};
  s.inputs = {{parse_expression("1", {1, 1})}};
  FeedbackLaw law = sontag_feedback(s, cert("0.5*x1^2", 1), plan(1));
  CHECK(law(Vec{1.0}) == Catch::Approx(1.0 - std::sqrt(2.0)));
}

TEST_CASE("the u = 0 branch applies where L_g V vanishes", "[clf]") {
  SystemDef s;
  s.n = 2;
  s.m = 1;
  s.drift = {parse_expression("-x1", {2, 1}), parse_expression("-x2", {2, 1})};
  s.inputs = {{parse_expression("0", {2, 1}), parse_expression("1", {2, 1})}};
  FeedbackLaw law = sontag_feedback(s, cert("0.5*(x1^2+x2^2)"), plan(2));
  const auto e = law.evaluate(Vec{1.0, 0.0});   // L_g V = x2 = 0 here
  CHECK(e.lg == 0.0);
  CHECK(e.u == 0.0);
  CHECK(law(Vec{1.0, 0.5}) != 0.0);
}

TEST_CASE("the closed-loop decrease identity holds everywhere sampled", "[clf]") {
  const auto& e = catalog_get("cubic_scalar");
  FeedbackLaw law = sontag_feedback(e.system, e.certificates[0], plan(1));
  for (const Vec& x : annulus_samples(plan(1))) {
    const auto ev = law.evaluate(x);
    if (ev.lf == 0.0 && ev.lg == 0.0) continue;
    const double achieved = ev.lf + ev.u * ev.lg;
    const double expected = -std::sqrt(ev.lf * ev.lf + ev.lg * ev.lg * ev.lg * ev.lg);
    REQUIRE(std::abs(achieved - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
    REQUIRE(achieved < 0.0);
  }
}

TEST_CASE("non-CLF certificates are rejected with a witness", "[clf]") {
  // dx = x + 0*u cannot decrease: L_g V = 0 while L_f V > 0
  SystemDef s;
  s.n = 1;
  s.m = 1;
  s.drift = {parse_expression("x1", {1, 1})};
  s.inputs = {{parse_expression("0", {1, 1})}};
  try {
    sontag_feedback(s, cert("0.5*x1^2", 1), plan(1));
    FAIL("expected precondition rejection");
  } catch (const PreconditionError& err) {
    CHECK(std::string(err.what()).find("not a CLF") != std::string::npos);
  }
}

TEST_CASE("near-singular L_g V values are flagged", "[clf]") {
  const auto& e = catalog_get("cubic_scalar");
  FeedbackLaw law{e.system, e.certificates[0]};
  const auto ev = law.evaluate(Vec{1e-10});   // L_g V = x inside the flag band
  CHECK(ev.near_singular);
  const auto ok = law.evaluate(Vec{0.5});
  CHECK_FALSE(ok.near_singular);
}

TEST_CASE("small control profiles", "[clf]") {
  const std::vector<double> radii{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125};
  {
    SystemDef s;
    s.n = 1;
    s.m = 1;
    s.drift = {parse_expression("-x1", {1, 1})};
    s.inputs = {{parse_expression("1", {1, 1})}};
    auto profile = small_control_profile(s, cert("0.5*x1^2", 1), radii, plan(1));
    REQUIRE(profile.scp_holds);
    for (const auto& pt : profile.points) CHECK(pt.required_u == 0.0);
  }
  {
    SystemDef s;
    s.n = 1;
    s.m = 1;
    s.drift = {parse_expression("x1", {1, 1})};
    s.inputs = {{parse_expression("1", {1, 1})}};
    auto profile = small_control_profile(s, cert("0.5*x1^2", 1), radii, plan(1));
    REQUIRE(profile.scp_holds);
    // L_f V / |L_g V| = delta, scaled by 1 + margin_frac
    for (std::size_t i = 0; i < radii.size(); ++i)
      CHECK(profile.points[i].required_u == Catch::Approx(1.1 * radii[i]).epsilon(1e-6));
  }
  {
    SystemDef s;
    s.n = 1;
    s.m = 1;
    s.drift = {parse_expression("x1^2", {1, 1})};
    s.inputs = {{parse_expression("0", {1, 1})}};
    auto profile = small_control_profile(s, cert("0.5*x1^2", 1), radii, plan(1));
    CHECK_FALSE(profile.scp_holds);
    CHECK(std::isinf(profile.points.front().required_u));
  }
}

TEST_CASE("feedback magnitude shrinks with the radius when the SCP holds", "[clf]") {
  const auto& e = catalog_get("cubic_scalar");
  FeedbackLaw law = sontag_feedback(e.system, e.certificates[0], plan(1));
  const std::vector<double> radii{1.0, 0.5, 0.25, 0.125, 0.0625};
  auto profile = small_control_profile(e.system, e.certificates[0], radii, plan(1));
  REQUIRE(profile.scp_holds);
  double prev = std::numeric_limits<double>::infinity();
  for (double delta : radii) {
    const double mag = std::max(std::abs(law(Vec{delta})), std::abs(law(Vec{-delta})));
    CHECK(mag <= prev + 1e-12);
    prev = mag;
  }
  CHECK(prev <= 0.2);
}

TEST_CASE("circle levelsets give the axis roots", "[clf]") {
  const auto v = cert("0.5*(x1^2+x2^2)");
  {
    std::vector<Expr> g = {make_const(1.0), make_const(0.0)};
    auto locus = singularity_locus(v, g, 0.5);
    REQUIRE(locus.roots.size() == 2);
    CHECK(locus.method == "radial");
    for (const auto& r : locus.roots) {
      CHECK(std::abs(r.x[0]) <= 1e-6);
      CHECK(std::abs(std::abs(r.x[1]) - 1.0) <= 1e-6);
      CHECK(r.level_residual <= 1e-10);
      CHECK(std::abs(r.inner_product) <= 1e-8);
    }
  }
  {
    std::vector<Expr> g = {make_const(0.0), make_const(1.0)};
    auto locus = singularity_locus(v, g, 2.0);
    REQUIRE(locus.roots.size() == 2);
    for (const auto& r : locus.roots) {
      CHECK(std::abs(r.x[1]) <= 1e-6);
      CHECK(std::abs(std::abs(r.x[0]) - 2.0) <= 1e-6);
    }
  }
}

TEST_CASE("every catalog certificate has a singular point on every levelset", "[clf]") {
  const double levels[3] = {0.1, 1.0, 10.0};
  const double dirs[3][2] = {{1.0, 0.0}, {0.0, 1.0}, {M_SQRT1_2, M_SQRT1_2}};
  for (const char* id : {"canonical", "ahmadi", "linear_spiral"}) {
    const auto& v = catalog_get(id).certificates[0];
    for (const auto& d : dirs)
      for (double c : levels) {
        std::vector<Expr> g = {make_const(d[0]), make_const(d[1])};
        auto locus = singularity_locus(v, g, c);
        INFO(id << " g=(" << d[0] << "," << d[1] << ") c=" << c);
        REQUIRE(!locus.roots.empty());
        CHECK(locus.roots.size() % 2 == 0);
        for (const auto& r : locus.roots) {
          CHECK(r.level_residual <= 1e-8);
          CHECK(std::abs(r.inner_product) <= 1e-8);
        }
      }
  }
}

TEST_CASE("state-dependent input directions work on the trace", "[clf]") {
  const auto& v = catalog_get("ahmadi").certificates[0];
  std::vector<Expr> g = {parse_expression("1", {2, 0}), parse_expression("1", {2, 0})};
  auto locus = singularity_locus(v, g, 1.0);
  REQUIRE(locus.roots.size() >= 2);
  for (const auto& r : locus.roots) CHECK(std::abs(r.inner_product) <= 1e-8);
}

TEST_CASE("bent levelsets fall back to marching squares", "[clf]") {
  const auto v = cert("(x1-8*x2^2)^2+x2^2");
  std::vector<Expr> g = {make_const(1.0), make_const(0.0)};
  auto locus = singularity_locus(v, g, 1.0);
  CHECK(locus.method == "marching squares");
  REQUIRE(!locus.roots.empty());
  for (const auto& r : locus.roots) {
    CHECK(r.level_residual <= 1e-8);
    CHECK(std::abs(r.inner_product) <= 1e-8);
  }
}

TEST_CASE("locus rejects bad inputs", "[clf]") {
  const auto v = cert("0.5*(x1^2+x2^2)");
  std::vector<Expr> g = {make_const(1.0), make_const(0.0)};
  CHECK_THROWS_AS(singularity_locus(v, g, -1.0), PreconditionError);
  CHECK_THROWS_AS(singularity_locus(cert("0.5*x1^2", 1), {make_const(1.0)}, 1.0),
                  PreconditionError);
  // bounded certificate never reaches the level: flagged, not looped forever
  CHECK_THROWS_AS(singularity_locus(cert("(x1^2+x2^2)/(1+x1^2+x2^2)"), g, 2.0),
                  PreconditionError);
}
