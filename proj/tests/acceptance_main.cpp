// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance <path-to-cli> <source-dir>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/catalog.hpp"
#include "lyap/clf.hpp"
#include "lyap/homotopy.hpp"
#include "lyap/linstab.hpp"
#include "lyap/lyapcert.hpp"
#include "lyap/obstruct.hpp"
#include "lyap/simkit.hpp"

using namespace lyap;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

struct CliRun {
  int exit_code = -1;
  nlohmann::json report;
};

CliRun run_cli(const std::string& args, const std::string& tag) {
  const fs::path dir = g_work / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cmd = g_cli + " " + args + " --out " + dir.string() + " > " +
                          (dir / "stdout.txt").string() + " 2>&1";
  CliRun r;
  r.exit_code = WEXITSTATUS(std::system(cmd.c_str()));
  if (fs::exists(dir / "report.json")) {
    std::ifstream f(dir / "report.json");
    f >> r.report;
  }
  return r;
}

SamplePlan plan_2d(int radial, int angular) {
  SamplePlan p;
  p.dim = 2;
  p.radial = radial;
  p.angular = angular;
  return p;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ScalarCertificate quadratic_certificate(const Mat& p) {
  ScalarCertificate v;
  v.n = 2;
  v.name = "V";
  const std::string body = "0.5*(" + fmt(p(0, 0)) + "*x1^2+2*" + fmt(p(0, 1)) + "*x1*x2+" +
                           fmt(p(1, 1)) + "*x2^2)";
  v.body = parse_expression(body, {2, 0});
  return v;
}

// --- criteria ----------------------------------------------------------------

// 1. the log certificate verifies over >= 10^4 annulus samples through the CLI
void criterion_1() {
  auto r = run_cli("verify --catalog ahmadi --check lyapunov --no-timestamp", "c1");
  require(r.exit_code == 0, "CLI exit code");
  require(r.report.at("verdict") == "pass", "verdict");
  require(r.report.at("samples").get<long>() >= 10000, "sample count");
  require(r.report.at("margin").get<double>() < 0.0, "strictly negative decrease margin");
  // the library agrees at the same resolution
  const auto& e = catalog_get("ahmadi");
  auto rep = verify_lyapunov(e.certificates[0], e.system, plan_2d(100, 100));
  require(rep.verdict == Verdict::pass, "library verdict");
  require(rep.worst_margin < 0.0, "library margin");
}

// 2. convexity fails with an axis chord witness; Hessian matches -6/25
void criterion_2() {
  const auto& e = catalog_get("ahmadi");
  auto rep = verify_convexity(e.certificates[0], plan_2d(100, 100), ConvexityMode::chord);
  require(rep.verdict == Verdict::fail, "chord verdict");
  require(!rep.witness.empty() && !rep.witness_partner.empty(), "chord witness pair");
  require(rep.witness[1] == 0.0 && rep.witness_partner[1] == 0.0,
          "witness chord lies on the x1 axis");
  HessResult h = eval_hess(e.certificates[0].body, Vec{2.0, 0.0});
  const double min_eig = symmetric_eigenvalues(h.hessian).front();
  require(std::abs(min_eig - (-6.0 / 25.0)) <= 1e-6, "analytic second derivative -6/25");
  auto hess = verify_convexity(e.certificates[0], plan_2d(100, 100), ConvexityMode::hessian);
  require(hess.verdict == Verdict::fail, "hessian verdict");
}

// 3. the shipped diffeomorphism makes the certificate geodesically convex
void criterion_3() {
  const auto& e = catalog_get("ahmadi");
  const auto& v = e.certificates[0];
  require(v.diffeo.has_value(), "diffeo shipped");
  auto rep = verify_gconvex(v, *v.diffeo, plan_2d(100, 100));
  require(rep.verdict == Verdict::pass, "gconvex verdict");
  Expr pulled = substitute_vars(v.body, v.diffeo->inverse);
  for (const Vec& y : annulus_samples(plan_2d(100, 100))) {
    const double w = eval(pulled, y);
    require(std::abs(w - dot(y, y)) <= 1e-8 * std::max(1.0, dot(y, y)),
            "pullback equals the round quadratic");
  }
}

// 4. obstruction reproduction with the brute-force oracle
void criterion_4() {
  const auto& hot = catalog_get("gauss_spiral_f2_beta100");
  auto search = ray_alignment_search(hot.system, plan_2d(100, 100));
  require(search.verdict == ObstructionVerdict::violated, "violated verdict");
  require(search.best.residual <= 1e-6, "refined residual");
  const double dist = std::hypot(search.best.x[0] - 0.51, search.best.x[1] - 0.45);
  require(dist <= 0.1, "witness near (0.51, 0.45), got distance " + fmt(dist));
  require(search.best.lambda >= 0.0, "lambda reported");

  // independent 400 x 400 grid oracle over [-2, 2]^2
  double grid_best = -2.0;
  for (int i = 0; i < 400; ++i)
    for (int j = 0; j < 400; ++j) {
      const double a = -2.0 + 4.0 * i / 399.0;
      const double b = -2.0 + 4.0 * j / 399.0;
      const double rr = std::hypot(a, b);
      if (rr < 1e-3) continue;
      const Vec x{a, b};
      const double f1 = eval(hot.system.drift[0], x);
      const double f2 = eval(hot.system.drift[1], x);
      const double nf = std::hypot(f1, f2);
      if (nf == 0.0) { grid_best = 1.0; continue; }
      grid_best = std::max(grid_best, (f1 * a + f2 * b) / (nf * rr));
    }
  require(grid_best >= 0.999, "grid oracle sees the near-aligned direction");
  require(search.best.alignment >= grid_best - 1e-9, "refinement at least as aligned as grid");

  const auto& cold = catalog_get("linear_spiral");
  auto clear = ray_alignment_search(cold.system, plan_2d(100, 100));
  require(clear.verdict == ObstructionVerdict::clear, "pure spiral clear");
  require(clear.best.alignment <= 0.999, "pure spiral alignment bound");
}

// 5. stability along the single-segment paths and the two-segment chain
void criterion_5() {
  SamplePlan p = plan_2d(40, 50);   // 2000 samples
  int verified_pairs = 0;
  for (const auto& entry : catalog_all()) {
    if (entry.system.n != 2 || !entry.system.autonomous()) continue;
    for (const auto& cert : entry.certificates) {
      if (verify_lyapunov(cert, entry.system, p).verdict != Verdict::pass) continue;
      if (verify_convexity(cert, p, ConvexityMode::chord).verdict != Verdict::pass) continue;
      auto rep = verify_homotopy_stability(single_segment_path(entry.system, cert), p, 101);
      require(rep.verdict == Verdict::pass, "single segment fails for " + entry.id);
      ++verified_pairs;
    }
  }
  require(verified_pairs >= 2, "at least two convex certified pairs in the catalog");

  const auto& spiral = catalog_get("linear_spiral");
  Mat p_mat = solve_lyapunov_eq(spiral.matrices.at("A"), Mat::identity(2));
  require(std::abs(p_mat(0, 0) - 5.0) <= 1e-9 && std::abs(p_mat(1, 1) - 5.0) <= 1e-9 &&
              std::abs(p_mat(0, 1)) <= 1e-9,
          "matrix equation solution is 5 I");
  const auto& canon = catalog_get("canonical");
  HomotopyPath chain = build_chain_homotopy(canon.system, canon.certificates[0], spiral.system,
                                            quadratic_certificate(p_mat), p);
  auto rep = verify_homotopy_stability(chain, p, 101);
  require(rep.verdict == Verdict::pass, "two-segment chain");
}

// 6. Sontag feedback on the cubic system and its closed loop
void criterion_6() {
  const auto& e = catalog_get("cubic_scalar");
  SamplePlan p1;
  p1.dim = 1;
  FeedbackLaw law = sontag_feedback(e.system, e.certificates[0], p1);
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    double x = u(rng);
    if (std::abs(x) < 1e-6) x = 0.5;
    const double expected = -x * x * x - x * std::sqrt(x * x * x * x + 1.0);
    require(std::abs(law(Vec{x}) - expected) <= 1e-9 * std::max(1.0, std::abs(expected)),
            "feedback matches the closed form");
  }
  for (const Vec& x : annulus_samples(p1)) {
    const auto ev = law.evaluate(x);
    const double achieved = ev.lf + ev.u * ev.lg;
    const double expected = -std::sqrt(ev.lf * ev.lf + ev.lg * ev.lg * ev.lg * ev.lg);
    require(std::abs(achieved - expected) <= 1e-9 * std::max(1.0, std::abs(expected)),
            "decrease identity residual");
  }
  IntegrateOptions opt;
  opt.conv_eps = 1e-4;
  Trajectory tr = integrate(law.closed_loop(), Vec{2.0}, 10.0, opt);
  const double final_norm = norm2(tr.back());
  require(final_norm < 1e-3, "closed loop reaches |x| < 1e-3 by t = 10");
}

// 7. the singularity locus on circles, then across the catalog
void criterion_7() {
  ScalarCertificate v;
  v.n = 2;
  v.body = parse_expression("0.5*(x1^2+x2^2)", {2, 0});
  std::vector<Expr> e1 = {make_const(1.0), make_const(0.0)};
  auto locus = singularity_locus(v, e1, 0.5);
  require(locus.roots.size() == 2, "exactly two roots on the circle");
  for (const auto& r : locus.roots) {
    require(std::abs(r.x[0]) <= 1e-6, "root x1 coordinate");
    require(std::abs(std::abs(r.x[1]) - 1.0) <= 1e-6, "root x2 coordinate");
  }
  const double dirs[3][2] = {{1.0, 0.0}, {0.0, 1.0}, {M_SQRT1_2, M_SQRT1_2}};
  for (const char* id : {"canonical", "ahmadi", "linear_spiral"}) {
    const auto& cert = catalog_get(id).certificates[0];
    for (const auto& d : dirs)
      for (double c : {0.1, 1.0, 10.0}) {
        std::vector<Expr> g = {make_const(d[0]), make_const(d[1])};
        auto l = singularity_locus(cert, g, c);
        require(!l.roots.empty(), std::string("no roots for ") + id);
        for (const auto& r : l.roots) {
          require(r.level_residual <= 1e-8, "level residual");
          require(std::abs(r.inner_product) <= 1e-8, "inner product residual");
        }
      }
  }
}

// 8. Hautus test cases and the implication toward the obstruction scan
void criterion_8() {
  auto a = run_cli("hautus --A '0,1;0,0' --B '0;1' --no-timestamp", "c8a");
  require(a.exit_code == 0 && a.report.at("stabilizable") == true, "double integrator");
  auto b = run_cli("hautus --A '1,0;0,-1' --B '0;1' --no-timestamp", "c8b");
  require(b.exit_code == 1 && b.report.at("stabilizable") == false, "saddle not stabilizable");
  const auto failing = b.report.at("failing_eigenvalues");
  require(failing.size() == 1 && std::abs(failing[0][0].get<double>() - 1.0) <= 1e-9,
          "failing eigenvalue 1");
  const auto& e = catalog_get("double_integrator");
  auto scan = clf_obstruction_scan(e.system, plan_2d(60, 60));
  require(scan.verdict == ObstructionVerdict::clear, "Hautus pass implies clear scan");
}

// 9. the Hurwitz midpoint blend is unstable with spectral abscissa 4
void criterion_9() {
  const auto& e = catalog_get("hurwitz_pair");
  auto mid = hurwitz_blend(e.matrices.at("A1"), e.matrices.at("A2"), 0.5);
  require(std::abs(mid.max_real_part - 4.0) <= 1e-9, "midpoint spectral abscissa 4");
  require(hurwitz_blend(e.matrices.at("A1"), e.matrices.at("A2"), 0.0).max_real_part < 0.0,
          "endpoint stable");
  require(hurwitz_blend(e.matrices.at("A1"), e.matrices.at("A2"), 1.0).max_real_part < 0.0,
          "endpoint stable");
}

// 10. squared-distance decrease of the set homotopy field at s = 0
void criterion_10() {
  const auto& canon = catalog_get("canonical");
  const ConvexSetDef sets[2] = {ConvexSetDef{BoxSet{{-1.0, -1.0}, {1.0, 1.0}}},
                                ConvexSetDef{BallSet{{0.0, 0.0}, 1.0}}};
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (const auto& set : sets) {
    auto field = set_homotopy_field(0.0, canon.system, set);
    int outside = 0;
    while (outside < 1000) {
      const Vec x{u(rng), u(rng)};
      const Vec p = project_convex(set, x);
      const Vec gap = sub(x, p);
      const double dist = norm2(gap);
      if (dist <= 1e-9) continue;
      ++outside;
      const Vec f = field(x);
      require(std::abs(dot(gap, f) + dist * dist) <= 1e-10, "inner product is -dist^2");
    }
  }
}

// 11. Fenchel conjugates: self-conjugacy and the smooth equality
void criterion_11() {
  ScalarCertificate v;
  v.n = 2;
  v.name = "V";
  v.body = parse_expression("0.5*(x1^2+x2^2)", {2, 0});
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Vec y{u(rng), u(rng)};
    auto r = fenchel_conjugate(v, y);
    require(std::abs(r.value - 0.5 * dot(y, y)) <= 1e-6, "self conjugate quadratic");
  }
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Mat r(2, 2);
    for (double& c : r.a) c = entry(rng);
    Mat p = r.transposed() * r;
    p(0, 0) += 0.5;
    p(1, 1) += 0.5;
    ScalarCertificate q = quadratic_certificate(p);
    for (int k = 0; k < 25; ++k) {
      const Vec x{entry(rng), entry(rng)};
      GradResult g = eval_grad(q.body, x);
      auto conj = fenchel_conjugate(q, g.gradient);
      require(std::abs(conj.value + g.value - dot(g.gradient, x)) <= 1e-6,
              "Fenchel equality residual");
    }
  }
}

// 12. the trajectory bundle of the wide-bump spiral converges and is
// deterministic
void criterion_12() {
  const auto& e = catalog_get("gauss_spiral_f1");
  auto field = autonomous_field(e.system);
  const auto starts = lattice_points(3.0, 12);
  require(starts.size() == 144, "lattice size");
  GasReport gas = empirical_gas(field, starts, 200.0, 1e-6);
  require(gas.pass, "all 144 trajectories converge");

  IntegrateOptions opt;
  opt.conv_eps = 1e-6;
  const fs::path d1 = g_work / "c12_a";
  const fs::path d2 = g_work / "c12_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  auto f1 = export_portrait(field, starts, 200.0, d1.string(), opt);
  auto f2 = export_portrait(field, starts, 200.0, d2.string(), opt);
  require(f1.csv_paths.size() == 144 && f1.converged == 144, "bundle export converged");
  for (std::size_t i = 0; i < f1.csv_paths.size(); ++i) {
    std::ifstream a(f1.csv_paths[i]), b(f2.csv_paths[i]);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    require(sa.str() == sb.str(), "deterministic CSV output");
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

// 13. cross-cutting numerics: dual gradients, integrator error, conservation
void criterion_13() {
  std::mt19937_64 rng(1313);
  std::uniform_real_distribution<double> mag(0.1, 1.5);
  std::bernoulli_distribution flip(0.5);
  for (const auto& entry : catalog_all()) {
    std::vector<Expr> exprs;
    for (const auto& d : entry.system.drift) exprs.push_back(d);
    for (const auto& col : entry.system.inputs)
      for (const auto& g : col) exprs.push_back(g);
    for (const auto& c : entry.certificates) exprs.push_back(c.body);
    for (const auto& ex : exprs) {
      for (int trial = 0; trial < 100; ++trial) {
        Vec x(static_cast<std::size_t>(entry.system.n));
        for (double& c : x) c = (flip(rng) ? 1.0 : -1.0) * mag(rng);
        GradResult g = eval_grad(ex, x);
        Vec fd(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          Vec hi = x, lo = x;
          hi[i] += 1e-5;
          lo[i] -= 1e-5;
          fd[i] = (eval(ex, hi) - eval(ex, lo)) / 2e-5;
        }
        require(norm2(sub(g.gradient, fd)) <= 1e-6 * std::max(1.0, norm2(g.gradient)),
                "dual gradient vs finite differences in " + entry.id);
      }
    }
  }
  IntegrateOptions opt;
  opt.rel_tol = 1e-9;
  opt.abs_tol = 1e-14;
  FieldFn decay = [](std::span<const double> x) { return Vec{-x[0], -x[1]}; };
  Trajectory tr = integrate(decay, Vec{1.0, 0.0}, 1.0, opt);
  require(std::abs(tr.back()[0] - std::exp(-1.0)) / std::exp(-1.0) <= 10.0 * opt.rel_tol,
          "exp decay global error");
  FieldFn rot = [](std::span<const double> x) { return Vec{x[1], -x[0]}; };
  IntegrateOptions ropt;
  ropt.conv_eps = 0.0;
  Trajectory rt = integrate(rot, Vec{1.0, 0.0}, 20.0 * M_PI, ropt);
  for (const Vec& x : rt.states)
    require(std::abs(norm2(x) - 1.0) <= 1e-6, "rotation norm conservation");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <cli-path> [source-dir]\n";
    return 2;
  }
  g_cli = argv[1];
  g_work = fs::temp_directory_path() / "lyap_acceptance";
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"ahmadi certificate verifies on 10^4 annulus samples", criterion_1},
      {"nonconvexity witness on the x1 axis, Hessian -6/25", criterion_2},
      {"g-convex rescue through the shipped diffeomorphism", criterion_3},
      {"obstruction reproduction with grid oracle agreement", criterion_4},
      {"stability along single-segment and chained homotopies", criterion_5},
      {"Sontag closed loop on the cubic system", criterion_6},
      {"singularity locus roots on every catalog levelset", criterion_7},
      {"Hautus stabilizability cases and scan implication", criterion_8},
      {"Hurwitz midpoint blend has spectral abscissa 4", criterion_9},
      {"set homotopy field decreases the squared distance", criterion_10},
      {"Fenchel conjugate identities", criterion_11},
      {"trajectory bundle converges deterministically", criterion_12},
      {"cross-cutting numerics", criterion_13},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i].second();
      std::printf("PASS  %2zu. %s\n", i + 1, criteria[i].first.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  %2zu. %s: %s\n", i + 1, criteria[i].first.c_str(), e.what());
    }
    std::fflush(stdout);
  }
  if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  else std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}
