#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lyap/expr.hpp"
#include "lyap/linalg.hpp"
#include "lyap/system.hpp"

namespace lyap {

// Built-in example systems used across the tests, docs and CLI. Expected
// verdicts are what the verifiers reproduce at default tolerances; the
// regression suite asserts every one of them.
struct CatalogEntry {
  std::string id;
  std::string note;
  SystemDef system;
  std::vector<ScalarCertificate> certificates;
  std::map<std::string, std::string> expected;
  std::map<std::string, Mat> matrices;   // companion matrices (Hurwitz pair)
};

namespace detail {

inline CatalogEntry make_entry(const std::string& id, const std::string& note, int n, int m,
                               std::map<std::string, double> params,
                               std::vector<std::string> drift,
                               std::vector<std::vector<std::string>> inputs,
                               std::map<std::string, std::string> expected) {
  CatalogEntry e;
  e.id = id;
  e.note = note;
  e.system.n = n;
  e.system.m = m;
  e.system.params = std::move(params);
  const Dims dims{n, 0};   // fields are functions of the state only
  for (const auto& d : drift) e.system.drift.push_back(parse_expression(d, dims, e.system.params));
  for (const auto& col : inputs) {
    std::vector<Expr> column;
    for (const auto& g : col) column.push_back(parse_expression(g, dims, e.system.params));
    e.system.inputs.push_back(std::move(column));
  }
  e.expected = std::move(expected);
  return e;
}

inline ScalarCertificate make_certificate(const std::string& name, int n, const std::string& body,
                                          std::map<std::string, std::string> claims,
                                          const std::map<std::string, double>& params = {}) {
  ScalarCertificate c;
  c.n = n;
  c.name = name;
  c.body = parse_expression(body, Dims{n, 0}, params);
  c.claims = std::move(claims);
  return c;
}

inline DiffeoDef quadrant_log_diffeo() {
  // straightens log(1+x1^2)+x2^2 into y1^2+y2^2
  DiffeoDef phi;
  const Dims d{2, 0};
  phi.forward.push_back(parse_expression("sign(x1)*sqrt(log(1+x1^2))", d));
  phi.forward.push_back(parse_expression("x2", d));
  phi.inverse.push_back(parse_expression("sign(x1)*sqrt(exp(x1^2)-1)", d));
  phi.inverse.push_back(parse_expression("x2", d));
  return phi;
}

inline std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> entries;

  {
    CatalogEntry e = make_entry(
        "canonical", "the inward field -x with the canonical quadratic certificate", 2, 0, {},
        {"-x1", "-x2"}, {},
        {{"lyapunov", "pass"}, {"convex", "pass"}, {"obstruction", "clear"},
         {"empirical_gas", "pass"}});
    e.certificates.push_back(make_certificate("V", 2, "0.5*(x1^2+x2^2)",
                                              {{"lyapunov", "pass"}, {"convex", "pass"}}));
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry(
        "ahmadi",
        "globally stable planar system with no polynomial Lyapunov function; "
        "log(1+x1^2)+x2^2 certifies it but is not convex",
        2, 0, {}, {"-x1+x1*x2", "-x2"}, {},
        {{"lyapunov", "pass"}, {"convex", "fail"}, {"gconvex", "pass"}, {"obstruction", "clear"},
         {"empirical_gas", "pass"}});
    ScalarCertificate v = make_certificate(
        "V", 2, "log(1+x1^2)+x2^2",
        {{"lyapunov", "pass"}, {"convex", "fail"}, {"gconvex", "pass"}});
    v.diffeo = quadrant_log_diffeo();
    e.certificates.push_back(std::move(v));
    entries.push_back(std::move(e));
  }

  const std::string gauss_drift_1 =
      "alpha*x1+x2+gamma*(exp(-beta*((x1-p1)^2+(x2-p2)^2))-exp(-beta*(p1^2+p2^2)))";
  const std::string gauss_drift_2 =
      "-x1+alpha*x2+gamma*(exp(-beta*((x1-p1)^2+(x2-p2)^2))-exp(-beta*(p1^2+p2^2)))";
  {
    entries.push_back(make_entry(
        "gauss_spiral_f1",
        "stable spiral with a wide Gaussian disturbance; the offset nearly cancels it",
        2, 0, {{"alpha", -0.2}, {"beta", 0.01}, {"gamma", 10.0}, {"p1", 0.3}, {"p2", 0.3}},
        {gauss_drift_1, gauss_drift_2}, {},
        {{"obstruction", "clear"}, {"empirical_gas", "pass"}}));
    entries.push_back(make_entry(
        "gauss_spiral_f2", "weaker spiral, wide Gaussian centered at (0.5, 0.5)", 2, 0,
        {{"alpha", -0.1}, {"beta", 0.01}, {"gamma", 10.0}, {"p1", 0.5}, {"p2", 0.5}},
        {gauss_drift_1, gauss_drift_2}, {}, {{"obstruction", "clear"}}));
    entries.push_back(make_entry(
        "gauss_spiral_f1_beta100",
        "narrow-bump variant: the localized push creates a radially aligned direction", 2, 0,
        {{"alpha", -0.2}, {"beta", 100.0}, {"gamma", 10.0}, {"p1", 0.3}, {"p2", 0.3}},
        {gauss_drift_1, gauss_drift_2}, {}, {{"obstruction", "violated"}}));
    entries.push_back(make_entry(
        "gauss_spiral_f2_beta100",
        "narrow-bump variant with the witness near (0.51, 0.45)", 2, 0,
        {{"alpha", -0.1}, {"beta", 100.0}, {"gamma", 10.0}, {"p1", 0.5}, {"p2", 0.5}},
        {gauss_drift_1, gauss_drift_2}, {}, {{"obstruction", "violated"}}));
  }
  {
    entries.push_back(make_entry(
        "driftless_bilinear",
        "driftless bilinear system; all control authority vanishes on the x2 axis", 2, 1, {},
        {"0", "0"}, {{"x1", "x1*x2"}}, {{"clf_obstruction", "violated"}}));
  }
  {
    CatalogEntry e = make_entry(
        "linear_spiral", "stable linear spiral, quadratic certificate from the matrix equation",
        2, 0, {}, {"-0.1*x1+x2", "-x1-0.1*x2"}, {},
        {{"lyapunov", "pass"}, {"convex", "pass"}, {"obstruction", "clear"},
         {"empirical_gas", "pass"}});
    e.certificates.push_back(make_certificate("V", 2, "2.5*(x1^2+x2^2)",
                                              {{"lyapunov", "pass"}, {"convex", "pass"}}));
    e.matrices["A"] = Mat(2, 2);
    e.matrices["A"](0, 0) = -0.1;
    e.matrices["A"](0, 1) = 1.0;
    e.matrices["A"](1, 0) = -1.0;
    e.matrices["A"](1, 1) = -0.1;
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry("rotation", "pure rotation: decrease margin is exactly zero", 2,
                                0, {}, {"x2", "-x1"}, {},
                                {{"lyapunov", "fail"}, {"obstruction", "clear"}});
    e.certificates.push_back(make_certificate("V", 2, "0.5*(x1^2+x2^2)", {{"lyapunov", "fail"}}));
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry("cubic_scalar", "scalar system with unstabilizable linearization",
                                1, 1, {}, {"x1^3"}, {{"1"}}, {{"clf", "pass"}});
    e.certificates.push_back(make_certificate("V", 1, "0.5*x1^2", {{"clf", "pass"}}));
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry("double_integrator", "double integrator with force input", 2, 1,
                                {}, {"x2", "0"}, {{"0", "1"}},
                                {{"hautus", "stabilizable"}, {"clf_obstruction", "clear"}});
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry(
        "hurwitz_pair",
        "two Hurwitz matrices whose midpoint blend is unstable (spectral abscissa 4)", 2, 0, {},
        {"-x1+10*x2", "-x2"}, {}, {{"blend_midpoint", "unstable"}});
    Mat a1(2, 2), a2(2, 2);
    a1(0, 0) = -1.0; a1(0, 1) = 10.0; a1(1, 0) = 0.0;  a1(1, 1) = -1.0;
    a2(0, 0) = -1.0; a2(0, 1) = 0.0;  a2(1, 0) = 10.0; a2(1, 1) = -1.0;
    e.matrices["A1"] = a1;
    e.matrices["A2"] = a2;
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e = make_entry(
        "gconvex_demo",
        "nonconvex certificate that is convex along the geodesics of a pullback metric", 2, 0,
        {}, {"-x1+x1*x2", "-x2"}, {},
        {{"lyapunov", "pass"}, {"convex", "fail"}, {"gconvex", "pass"}});
    ScalarCertificate v = make_certificate("V", 2, "log(1+x1^2)+x2^2",
                                           {{"convex", "fail"}, {"gconvex", "pass"}});
    v.diffeo = quadrant_log_diffeo();
    e.certificates.push_back(std::move(v));
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace detail

inline const std::vector<CatalogEntry>& catalog_all() {
  static const std::vector<CatalogEntry> entries = detail::build_catalog();
  return entries;
}

inline std::vector<std::string> catalog_ids() {
  std::vector<std::string> ids;
  for (const auto& e : catalog_all()) ids.push_back(e.id);
  return ids;
}

inline const CatalogEntry& catalog_get(const std::string& id) {
  for (const auto& e : catalog_all())
    if (e.id == id) return e;
  throw std::out_of_range("unknown catalog id: " + id);
}

}  // namespace lyap
