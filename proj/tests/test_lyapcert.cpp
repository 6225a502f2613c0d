#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lyap/catalog.hpp"
#include "lyap/lyapcert.hpp"

using namespace lyap;

namespace {

SamplePlan small_plan() {
  SamplePlan p;
  p.radial = 40;
  p.angular = 40;
  return p;
}

ScalarCertificate cert(const std::string& body, int n = 2) {
  ScalarCertificate c;
  c.n = n;
  c.name = "V";
  c.body = parse_expression(body, {n, 0});
  return c;
}

SystemDef system2(const std::string& d1, const std::string& d2) {
  SystemDef s;
  s.n = 2;
  s.drift = {parse_expression(d1, {2, 0}), parse_expression(d2, {2, 0})};
  return s;
}

}  // namespace

TEST_CASE("canonical pair passes with the decrease margin on the inner shell", "[lyapcert]") {
  auto rep = verify_lyapunov(cert("0.5*(x1^2+x2^2)"), system2("-x1", "-x2"), small_plan());
  REQUIRE(rep.verdict == Verdict::pass);
  // <grad V, -x> = -||x||^2, worst case on the r_min shell
  const double r = norm2(rep.witness);
  CHECK(r <= small_plan().r_min * 1.05);
  CHECK(rep.worst_margin == Catch::Approx(-r * r).epsilon(1e-3));
}

TEST_CASE("the log certificate passes for its system", "[lyapcert]") {
  const auto& e = catalog_get("ahmadi");
  auto rep = verify_lyapunov(e.certificates[0], e.system, small_plan());
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.worst_margin < 0.0);
}

TEST_CASE("pure rotation fails with a zero decrease margin", "[lyapcert]") {
  const auto& e = catalog_get("rotation");
  auto rep = verify_lyapunov(e.certificates[0], e.system, small_plan());
  REQUIRE(rep.verdict == Verdict::fail);
  CHECK(rep.context == "decrease");
  // the violated inequality reproduces at the witness: inner product is 0
  GradResult g = eval_grad(e.certificates[0].body, rep.witness);
  Vec f = drift_at(e.system, rep.witness);
  CHECK(std::abs(dot(g.gradient, f)) <= 1e-12);
  CHECK(rep.worst_margin > 0.0);
  CHECK(rep.worst_margin <= 1.01e-8);
}

TEST_CASE("fail witnesses reproduce at least half the reported margin", "[lyapcert]") {
  VerifyTolerances tol;
  const auto& e = catalog_get("ahmadi");
  auto rep = verify_convexity(e.certificates[0], small_plan());
  REQUIRE(rep.verdict == Verdict::fail);
  const double standalone =
      rep.context == "chord"
          ? chord_margin(e.certificates[0].body, rep.witness, rep.witness_partner, tol)
          : gradient_inequality_margin(e.certificates[0].body, rep.witness, rep.witness_partner,
                                       tol);
  CHECK(standalone >= 0.5 * rep.worst_margin);

  auto rot = verify_lyapunov(catalog_get("rotation").certificates[0],
                             catalog_get("rotation").system, small_plan());
  REQUIRE(rot.verdict == Verdict::fail);
  const double again = decrease_margin(catalog_get("rotation").certificates[0],
                                       catalog_get("rotation").system, rot.witness, tol);
  CHECK(again >= 0.5 * rot.worst_margin);
}

TEST_CASE("chord mode finds the hand-computed violation", "[lyapcert]") {
  VerifyTolerances tol;
  const auto v = cert("log(1+x1^2)+x2^2");
  // chord (1,0)-(3,0): midpoint value log 5, average (log 2 + log 10)/2
  const double hand = std::log(5.0) - 0.5 * (std::log(2.0) + std::log(10.0));
  REQUIRE(hand > 0.1);
  CHECK(chord_margin(v.body, Vec{1.0, 0.0}, Vec{3.0, 0.0}, tol) ==
        Catch::Approx(hand - tol.convex));

  auto rep = verify_convexity(v, small_plan(), ConvexityMode::chord);
  REQUIRE(rep.verdict == Verdict::fail);
  REQUIRE(rep.worst_margin >= hand - 1e-9);
}

TEST_CASE("hessian mode matches the analytic second derivative", "[lyapcert]") {
  const auto v = cert("log(1+x1^2)+x2^2");
  // d^2/dx1^2 log(1+x1^2) = 2(1-x1^2)/(1+x1^2)^2 = -6/25 at x1 = 2
  HessResult h = eval_hess(v.body, Vec{2.0, 0.0});
  Vec ev = symmetric_eigenvalues(h.hessian);
  CHECK(ev.front() == Catch::Approx(-6.0 / 25.0).margin(1e-9));

  auto rep = verify_convexity(v, small_plan(), ConvexityMode::hessian);
  CHECK(rep.verdict == Verdict::fail);
}

TEST_CASE("chord and hessian verdicts agree on the catalog certificates", "[lyapcert]") {
  for (const auto& entry : catalog_all()) {
    for (const auto& c : entry.certificates) {
      if (c.n != 2) continue;
      auto chord = verify_convexity(c, small_plan(), ConvexityMode::chord);
      auto hess = verify_convexity(c, small_plan(), ConvexityMode::hessian);
      INFO(entry.id);
      CHECK(chord.verdict == hess.verdict);
    }
  }
}

TEST_CASE("quadratics are convex with near-zero margin", "[lyapcert]") {
  auto rep = verify_convexity(cert("0.5*(x1^2+x2^2)"), small_plan());
  CHECK(rep.verdict == Verdict::pass);
  // chord margin of a quadratic is -|x-y|^2/8 - tol: bounded by the
  // closest sampled pair, never positive
  CHECK(rep.worst_margin >= -1e-6);
  CHECK(rep.worst_margin <= 0.0);
}

TEST_CASE("gconvex with the identity equals plain convexity", "[lyapcert]") {
  DiffeoDef identity;
  identity.forward = {parse_expression("x1", {2, 0}), parse_expression("x2", {2, 0})};
  identity.inverse = identity.forward;
  for (const auto& entry : catalog_all()) {
    for (const auto& c : entry.certificates) {
      if (c.n != 2) continue;
      auto plain = verify_convexity(c, small_plan(), ConvexityMode::chord);
      auto geo = verify_gconvex(c, identity, small_plan());
      INFO(entry.id);
      CHECK(plain.verdict == geo.verdict);
    }
  }
}

TEST_CASE("the quadrant diffeomorphism straightens the log certificate", "[lyapcert]") {
  const auto& e = catalog_get("gconvex_demo");
  const auto& v = e.certificates[0];
  REQUIRE(v.diffeo);
  auto rep = verify_gconvex(v, *v.diffeo, small_plan());
  CHECK(rep.verdict == Verdict::pass);

  // pullback equals the round quadratic on samples
  Expr pulled = substitute_vars(v.body, v.diffeo->inverse);
  for (const auto& y : annulus_samples(small_plan())) {
    const double w = eval(pulled, y);
    REQUIRE(std::abs(w - dot(y, y)) <= 1e-8 * std::max(1.0, dot(y, y)));
  }
}

TEST_CASE("a broken diffeomorphism is rejected with the worst point", "[lyapcert]") {
  DiffeoDef broken;
  broken.forward = {parse_expression("x1", {2, 0}), parse_expression("x2", {2, 0})};
  broken.inverse = {parse_expression("2*x1", {2, 0}), parse_expression("x2", {2, 0})};
  CHECK_THROWS_AS(verify_gconvex(cert("x1^2+x2^2"), broken, small_plan()), PreconditionError);
}

TEST_CASE("fenchel conjugate of the round quadratic is itself", "[lyapcert]") {
  const auto v = cert("0.5*(x1^2+x2^2)");
  auto r = fenchel_conjugate(v, Vec{1.0, 2.0});
  CHECK(r.value == Catch::Approx(2.5).margin(1e-8));
  CHECK(r.argmax[0] == Catch::Approx(1.0).margin(1e-5));
  CHECK(r.argmax[1] == Catch::Approx(2.0).margin(1e-5));
  CHECK_FALSE(r.on_boundary);

  auto zero = fenchel_conjugate(v, Vec{0.0, 0.0});
  CHECK(zero.value == Catch::Approx(0.0).margin(1e-10));
  CHECK(norm2(zero.argmax) <= 1e-5);
}

TEST_CASE("fenchel conjugate of the quartic", "[lyapcert]") {
  ScalarCertificate v;
  v.n = 1;
  v.body = parse_expression("x1^4/4", {1, 0});
  auto r = fenchel_conjugate(v, Vec{1.0});
  CHECK(r.value == Catch::Approx(0.75).margin(1e-7));
  CHECK(r.argmax[0] == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("fenchel equality residual for positive definite quadratics", "[lyapcert]") {
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    // P = R^T R + I/2, V = 0.5 <P x, x>
    Mat r(2, 2);
    for (double& c : r.a) c = u(rng);
    Mat p = r.transposed() * r;
    p(0, 0) += 0.5;
    p(1, 1) += 0.5;
    char body[160];
    std::snprintf(body, sizeof(body), "0.5*(%.17g*x1^2+2*%.17g*x1*x2+%.17g*x2^2)", p(0, 0),
                  p(0, 1), p(1, 1));
    const auto v = cert(body);
    for (int k = 0; k < 25; ++k) {
      const Vec x{u(rng), u(rng)};
      GradResult g = eval_grad(v.body, x);
      auto conj = fenchel_conjugate(v, g.gradient);
      const double residual = std::abs(conj.value + g.value - dot(g.gradient, x));
      REQUIRE(residual <= 1e-6);
    }
  }
}

TEST_CASE("boundary argmax raises the box warning", "[lyapcert]") {
  const auto v = cert("0.5*(x1^2+x2^2)");
  FenchelSearch search;
  search.box_halfwidth = 1.0;   // argmax of y = (3, 0) lies outside
  auto r = fenchel_conjugate(v, Vec{3.0, 0.0}, search);
  CHECK(r.on_boundary);
}

TEST_CASE("scaling the field preserves the verdict", "[lyapcert]") {
  auto rep = scale_invariance_check(cert("0.5*(x1^2+x2^2)"), system2("-x1", "-x2"),
                                    {0.1, 1.0, 3.0}, small_plan());
  CHECK(rep.verdict == Verdict::pass);

  const auto& a = catalog_get("ahmadi");
  auto rep2 = scale_invariance_check(a.certificates[0], a.system, {2.0}, small_plan());
  CHECK(rep2.verdict == Verdict::pass);

  const auto& rot = catalog_get("rotation");
  auto rep3 = scale_invariance_check(rot.certificates[0], rot.system, {5.0}, small_plan());
  CHECK(rep3.verdict == Verdict::fail);
}

TEST_CASE("convex certificates survive radial damping of the field", "[lyapcert]") {
  // lambda(x) in {0.5, ||x||^2, 2}: F - lambda(x) x stays certified
  const std::string lambdas[3] = {"0.5", "(x1^2+x2^2)", "2"};
  for (const char* id : {"canonical", "linear_spiral"}) {
    const auto& e = catalog_get(id);
    const auto& v = e.certificates[0];
    REQUIRE(verify_lyapunov(v, e.system, small_plan()).verdict == Verdict::pass);
    REQUIRE(verify_convexity(v, small_plan()).verdict == Verdict::pass);
    for (const auto& lam : lambdas) {
      SystemDef damped = e.system;
      for (int i = 0; i < damped.n; ++i) {
        Expr term = make_binary(Op::mul, parse_expression(lam, {2, 0}), make_var(i));
        damped.drift[static_cast<std::size_t>(i)] =
            make_binary(Op::sub, damped.drift[static_cast<std::size_t>(i)], term);
      }
      INFO(id << " with damping " << lam);
      CHECK(verify_lyapunov(v, damped, small_plan()).verdict == Verdict::pass);
    }
  }
}

TEST_CASE("the exponential decrease mode is strictly stronger", "[lyapcert]") {
  // <grad V, F> = -||x||^2 <= -V = -||x||^2/2 everywhere
  auto rep = verify_lyapunov(cert("0.5*(x1^2+x2^2)"), system2("-x1", "-x2"), small_plan(), {},
                             true);
  CHECK(rep.verdict == Verdict::pass);
  CHECK(rep.check == "lyapunov-exponential");

  // the log certificate passes plainly but not exponentially: on the x1
  // axis <grad V, F> -> -2 while -V -> -log(1+x1^2) falls without bound
  const auto& e = catalog_get("ahmadi");
  REQUIRE(verify_lyapunov(e.certificates[0], e.system, small_plan()).verdict == Verdict::pass);
  auto strict = verify_lyapunov(e.certificates[0], e.system, small_plan(), {}, true);
  CHECK(strict.verdict == Verdict::fail);
}

TEST_CASE("domain errors surface as inconclusive", "[lyapcert]") {
  // log(x1) is undefined on half the annulus
  auto rep = verify_lyapunov(cert("log(x1)+x2^2"), system2("-x1", "-x2"), small_plan());
  CHECK(rep.verdict == Verdict::inconclusive);
  CHECK(rep.context.find("domain error") != std::string::npos);
  CHECK_FALSE(rep.witness.empty());
}
