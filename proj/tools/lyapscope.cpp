// lyapscope: numerical checks for Lyapunov certificates, convexity
// obstructions, stability-preserving homotopies and Sontag feedback.
//
// Exit codes: 0 pass, 1 fail/violated, 2 error or inconclusive.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lyap/catalog.hpp"
#include "lyap/clf.hpp"
#include "lyap/homotopy.hpp"
#include "lyap/linstab.hpp"
#include "lyap/lyapcert.hpp"
#include "lyap/obstruct.hpp"
#include "lyap/simkit.hpp"
#include "lyap/sysio.hpp"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string out_dir = ".";
  std::uint64_t seed = lyap::kDefaultSeed;
  bool seed_set = false;
  bool no_timestamp = false;
  bool explain = false;
  int threads = 1;
  double r_min = 1e-3;
  double r_max = 10.0;
  int radial = 100;
  int angular = 100;
  int total = 10000;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--out", c.out_dir, "output directory for reports and artifacts");
  cmd->add_option("--seed", c.seed, "sample seed")->each([&](const std::string&) { c.seed_set = true; });
  cmd->add_flag("--no-timestamp", c.no_timestamp, "omit the timestamp from report.json");
  cmd->add_flag("--explain", c.explain, "add a description of the check to the report");
  cmd->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_option("--rmin", c.r_min, "annulus inner radius");
  cmd->add_option("--rmax", c.r_max, "annulus outer radius");
  cmd->add_option("--radial", c.radial, "radial sample count (2D grid)");
  cmd->add_option("--angular", c.angular, "angular sample count (2D grid)");
  cmd->add_option("--total", c.total, "sample count outside the 2D grid");
}

lyap::SamplePlan make_plan(const CommonOpts& c, int dim) {
  lyap::SamplePlan p;
  p.dim = dim;
  p.r_min = c.r_min;
  p.r_max = c.r_max;
  p.radial = c.radial;
  p.angular = c.angular;
  p.total = c.total;
  p.threads = c.threads;
  p.seed = c.seed;
  if (!c.seed_set) {
    if (const char* env = std::getenv("LYAPSCOPE_SEED")) p.seed = std::strtoull(env, nullptr, 10);
  }
  return p;
}

void write_report(const CommonOpts& c, json j, const std::string& explanation) {
  if (c.explain) j["explanation"] = explanation;
  if (!c.no_timestamp) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  }
  std::filesystem::create_directories(c.out_dir);
  std::ofstream f(std::filesystem::path(c.out_dir) / "report.json");
  f << j.dump(2) << "\n";
  std::cout << j.dump(2) << std::endl;
}

int verdict_exit(lyap::Verdict v) {
  switch (v) {
    case lyap::Verdict::pass: return 0;
    case lyap::Verdict::fail: return 1;
    default: return 2;
  }
}

struct LoadedSystem {
  lyap::SystemDef system;
  std::vector<lyap::ScalarCertificate> certificates;
  std::string label;
};

LoadedSystem load_target(const std::string& catalog_id, const std::string& file) {
  LoadedSystem t;
  if (!catalog_id.empty()) {
    const auto& e = lyap::catalog_get(catalog_id);
    t.system = e.system;
    t.certificates = e.certificates;
    t.label = catalog_id;
    return t;
  }
  if (file.empty()) throw std::runtime_error("give either --catalog or --system");
  lyap::SystemFile f = lyap::load_system_file(file);
  t.system = f.system;
  t.certificates = f.certificates;
  t.label = file;
  return t;
}

const lyap::ScalarCertificate& pick_certificate(const LoadedSystem& t, const std::string& name) {
  if (t.certificates.empty())
    throw std::runtime_error("no certificate available for " + t.label);
  if (name.empty()) return t.certificates.front();
  for (const auto& c : t.certificates)
    if (c.name == name) return c;
  throw std::runtime_error("certificate '" + name + "' not found in " + t.label);
}

lyap::Mat parse_matrix_arg(const std::string& text) {
  lyap::Mat m;
  if (text.empty()) return m;
  if (text.front() == '[') {
    json j = json::parse(text);
    m.rows = static_cast<int>(j.size());
    m.cols = m.rows ? static_cast<int>(j[0].size()) : 0;
    m.a.resize(static_cast<std::size_t>(m.rows) * m.cols);
    for (int i = 0; i < m.rows; ++i)
      for (int k = 0; k < m.cols; ++k) m(i, k) = j[i][k].get<double>();
    return m;
  }
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    std::vector<double> r;
    std::stringstream rs(row);
    std::string cell;
    while (std::getline(rs, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(std::move(r));
  }
  m.rows = static_cast<int>(rows.size());
  m.cols = m.rows ? static_cast<int>(rows[0].size()) : 0;
  m.a.resize(static_cast<std::size_t>(m.rows) * m.cols);
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != m.cols)
      throw std::runtime_error("matrix rows have unequal lengths");
    for (int k = 0; k < m.cols; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

std::vector<double> parse_vector_arg(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
  return v;
}

json matrix_json(const lyap::Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json r = json::array();
    for (int k = 0; k < m.cols; ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

// --- subcommand implementations --------------------------------------------

int run_verify(const CommonOpts& c, const std::string& catalog_id, const std::string& file,
               const std::string& cert_name, const std::string& check, const std::string& mode,
               bool exponential) {
  LoadedSystem t = load_target(catalog_id, file);
  const auto& cert = pick_certificate(t, cert_name);
  lyap::SamplePlan plan = make_plan(c, t.system.n);

  lyap::CertificateReport rep;
  std::string explanation;
  if (check == "lyapunov") {
    rep = lyap::verify_lyapunov(cert, t.system, plan, {}, exponential);
    explanation =
        exponential
            ? "stricter decrease mode: <grad V, F> <= -V at every sample, which "
              "implies the plain decrease condition"
            : "samples the annulus and checks V > 0 away from the origin, V(0) = 0, "
              "strict decrease of V along the field, and growth of V along rays "
              "(radial unboundedness heuristic)";
  } else if (check == "convex") {
    const auto m = mode == "hessian" ? lyap::ConvexityMode::hessian : lyap::ConvexityMode::chord;
    rep = lyap::verify_convexity(cert, plan, m);
    explanation =
        "convexity at sampling resolution: midpoint chords and first-order lower "
        "bounds (chord mode) or minimum Hessian eigenvalue (hessian mode)";
  } else if (check == "gconvex") {
    if (!cert.diffeo) throw std::runtime_error("certificate has no diffeomorphism attached");
    rep = lyap::verify_gconvex(cert, *cert.diffeo, plan);
    explanation =
        "convexity of the certificate along the geodesics of the metric pulled "
        "back through the attached diffeomorphism";
  } else {
    throw std::runtime_error("unknown check: " + check);
  }
  json j = lyap::to_json(rep);
  j["target"] = t.label;
  j["certificate"] = cert.name;
  write_report(c, j, explanation);
  return verdict_exit(rep.verdict);
}

int run_obstruct(const CommonOpts& c, const std::string& catalog_id, const std::string& file) {
  LoadedSystem t = load_target(catalog_id, file);
  lyap::SamplePlan plan = make_plan(c, t.system.n);
  std::filesystem::create_directories(c.out_dir);

  if (t.system.autonomous()) {
    auto r = lyap::ray_alignment_search(t.system, plan);
    // grid CSV for plotting
    {
      std::ofstream csv(std::filesystem::path(c.out_dir) / "alignment_grid.csv");
      csv << "x1";
      for (int i = 1; i < t.system.n; ++i) csv << ",x" << (i + 1);
      csv << ",alignment\n";
      for (const auto& x : lyap::annulus_samples(plan)) {
        const auto w = lyap::alignment_at(t.system, x);
        for (std::size_t i = 0; i < x.size(); ++i) csv << (i ? "," : "") << lyap::format_g17(x[i]);
        csv << "," << lyap::format_g17(w.alignment) << "\n";
      }
    }
    json j;
    j["check"] = "ray-alignment";
    j["verdict"] = r.verdict == lyap::ObstructionVerdict::violated ? "violated" : "clear";
    j["witness"] = r.best.x;
    j["lambda"] = r.best.lambda;
    j["alignment"] = r.best.alignment;
    j["residual"] = r.best.residual;
    j["grid_best_alignment"] = r.grid_best_alignment;
    j["samples"] = r.samples_used;
    j["seed"] = plan.seed;
    j["target"] = t.label;
    write_report(c, j,
                 "searches for a radial fixed direction F(x) = lambda x with lambda >= 0; "
                 "finding one rules out any smooth convex Lyapunov function");
    return r.verdict == lyap::ObstructionVerdict::violated ? 1 : 0;
  }

  auto r = lyap::clf_obstruction_scan(t.system, plan);
  auto nh = lyap::nonholonomic_check(t.system, plan);
  json j;
  j["check"] = "clf-obstruction";
  j["verdict"] = r.verdict == lyap::ObstructionVerdict::violated ? "violated" : "clear";
  if (r.witness) j["witness"] = *r.witness;
  j["min_input_norm"] = r.min_input_norm;
  j["min_input_point"] = r.min_input_point;
  j["drift_residual_there"] = r.drift_residual_there;
  j["nonholonomic"] = nh.verdict == lyap::NonholonomicVerdict::obstructed ? "obstructed"
                                                                          : "not-applicable";
  j["nonholonomic_reason"] = nh.reason;
  j["samples"] = r.samples_used;
  j["seed"] = plan.seed;
  j["target"] = t.label;
  write_report(c, j,
               "looks for a state where every input column vanishes while the drift is a "
               "nonnegative radial multiple; such a state rules out a smooth convex CLF. "
               "Driftless systems with constant low-rank input columns are flagged outright");
  return r.verdict == lyap::ObstructionVerdict::violated ? 1 : 0;
}

int run_homotopy(const CommonOpts& c, const std::string& from, const std::string& to,
                 const std::string& cert1, const std::string& cert2, int s_grid) {
  auto load_side = [&](const std::string& spec) {
    if (std::filesystem::exists(spec)) return load_target("", spec);
    return load_target(spec, "");
  };
  LoadedSystem a = load_side(from);
  LoadedSystem b = load_side(to);
  lyap::SamplePlan plan = make_plan(c, a.system.n);
  const auto& v1 = pick_certificate(a, cert1);
  const auto& v2 = pick_certificate(b, cert2);

  lyap::HomotopyPath path = lyap::build_chain_homotopy(a.system, v1, b.system, v2, plan);
  lyap::CertificateReport rep = lyap::verify_homotopy_stability(path, plan, s_grid);

  std::filesystem::create_directories(c.out_dir);
  {
    std::ofstream csv(std::filesystem::path(c.out_dir) / "homotopy_margins.csv");
    csv << "s,margin";
    for (int i = 0; i < a.system.n; ++i) csv << ",witness_x" << (i + 1);
    csv << "\n";
    const auto samples = lyap::annulus_samples(plan);
    for (int si = 0; si < s_grid; ++si) {
      const double s = s_grid == 1 ? 0.0 : static_cast<double>(si) / (s_grid - 1);
      const auto& seg = path.segment_at(s);
      double worst = -std::numeric_limits<double>::infinity();
      lyap::Vec wx;
      for (const auto& x : samples) {
        const lyap::Vec h = path(s, x);
        auto g = lyap::eval_grad(seg.certificate.body, x);
        const double margin = lyap::dot(g.gradient, h);
        if (margin > worst) {
          worst = margin;
          wx = x;
        }
      }
      csv << lyap::format_g17(s) << "," << lyap::format_g17(worst);
      for (double x : wx) csv << "," << lyap::format_g17(x);
      csv << "\n";
    }
  }
  json j = lyap::to_json(rep);
  j["from"] = a.label;
  j["to"] = b.label;
  j["s_grid"] = s_grid;
  write_report(c, j,
               "verifies the certificate decrease along the two-segment straight-line "
               "chain between the fields through the canonical inward field -x");
  return verdict_exit(rep.verdict);
}

int run_sontag(const CommonOpts& c, const std::string& catalog_id, const std::string& file,
               const std::string& cert_name, const std::string& x0_text, double t_final) {
  LoadedSystem t = load_target(catalog_id, file);
  const auto& cert = pick_certificate(t, cert_name);
  lyap::SamplePlan plan = make_plan(c, t.system.n);
  lyap::FeedbackLaw law = lyap::sontag_feedback(t.system, cert, plan);

  std::filesystem::create_directories(c.out_dir);
  double worst_identity = 0.0;
  {
    std::ofstream csv(std::filesystem::path(c.out_dir) / "feedback_grid.csv");
    for (int i = 0; i < t.system.n; ++i) csv << (i ? "," : "") << "x" << (i + 1);
    csv << ",u,LfV,LgV\n";
    for (const auto& x : lyap::annulus_samples(plan)) {
      const auto e = law.evaluate(x);
      for (std::size_t i = 0; i < x.size(); ++i) csv << (i ? "," : "") << lyap::format_g17(x[i]);
      csv << "," << lyap::format_g17(e.u) << "," << lyap::format_g17(e.lf) << ","
          << lyap::format_g17(e.lg) << "\n";
      const double closed = e.lf + e.u * e.lg;
      const double expected = -std::sqrt(e.lf * e.lf + e.lg * e.lg * e.lg * e.lg);
      if (e.lf != 0.0 || e.lg != 0.0)
        worst_identity = std::max(worst_identity, std::abs(closed - expected) /
                                                      std::max(1.0, std::abs(expected)));
    }
  }

  json j;
  j["check"] = "sontag";
  j["decrease_identity_residual"] = worst_identity;
  j["target"] = t.label;
  j["seed"] = plan.seed;

  if (!x0_text.empty()) {
    lyap::Vec x0 = parse_vector_arg(x0_text);
    lyap::IntegrateOptions opt;
    opt.conv_eps = 1e-6;
    lyap::Trajectory tr = lyap::integrate(law.closed_loop(), x0, t_final, opt);
    std::ofstream csv(std::filesystem::path(c.out_dir) / "closed_loop.csv");
    csv << "t";
    for (int i = 0; i < t.system.n; ++i) csv << ",x" << (i + 1);
    csv << ",u\n";
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      csv << lyap::format_g17(tr.times[r]);
      for (double v : tr.states[r]) csv << "," << lyap::format_g17(v);
      csv << "," << lyap::format_g17(law(tr.states[r])) << "\n";
    }
    j["closed_loop_termination"] = lyap::to_cstring(tr.termination);
    j["closed_loop_final_norm"] = lyap::norm2(tr.back());
    j["closed_loop_t_end"] = tr.end_time();
  }
  const bool ok = worst_identity <= 1e-9;
  j["verdict"] = ok ? "pass" : "fail";
  write_report(c, j,
               "synthesizes the universal feedback u = -(LfV + sqrt(LfV^2 + LgV^4))/LgV "
               "(0 where LgV = 0) and checks the closed-loop decrease identity");
  return ok ? 0 : 1;
}

int run_singular(const CommonOpts& c, const std::string& catalog_id, const std::string& file,
                 const std::string& cert_name, const std::string& g_text, double level) {
  LoadedSystem t = load_target(catalog_id, file);
  const auto& cert = pick_certificate(t, cert_name);
  std::vector<double> gv = parse_vector_arg(g_text);
  std::vector<lyap::Expr> g;
  for (double v : gv) g.push_back(lyap::make_const(v));

  lyap::LocusResult locus = lyap::singularity_locus(cert, g, level);

  std::filesystem::create_directories(c.out_dir);
  {
    std::ofstream csv(std::filesystem::path(c.out_dir) / "levelset.csv");
    csv << "theta,x1,x2,h\n";
    for (const auto& p : lyap::trace_levelset(cert, g, level)) {
      csv << lyap::format_g17(p.theta) << "," << lyap::format_g17(p.x[0]) << ","
          << lyap::format_g17(p.x[1]) << "," << lyap::format_g17(p.inner_product) << "\n";
    }
  }
  {
    std::ofstream csv(std::filesystem::path(c.out_dir) / "roots.csv");
    csv << "x1,x2,level_residual,inner_product\n";
    for (const auto& r : locus.roots) {
      csv << lyap::format_g17(r.x[0]) << "," << lyap::format_g17(r.x[1]) << ","
          << lyap::format_g17(r.level_residual) << "," << lyap::format_g17(r.inner_product)
          << "\n";
    }
  }
  json j;
  j["check"] = "singularity-locus";
  j["method"] = locus.method;
  j["root_count"] = locus.roots.size();
  json roots = json::array();
  for (const auto& r : locus.roots) roots.push_back(r.x);
  j["roots"] = roots;
  j["level"] = level;
  j["target"] = t.label;
  const bool ok = !locus.roots.empty();
  j["verdict"] = ok ? "pass" : "fail";
  write_report(c, j,
               "traces the levelset V = c and locates the points where the gradient of V "
               "is orthogonal to the given input direction; at least one exists on every "
               "levelset of a planar Lyapunov function");
  return ok ? 0 : 1;
}

int run_hautus(const CommonOpts& c, const std::string& a_text, const std::string& b_text) {
  lyap::Mat a = parse_matrix_arg(a_text);
  lyap::Mat b = parse_matrix_arg(b_text);
  auto r = lyap::hautus_test(a, b);
  json j;
  j["check"] = "hautus";
  j["stabilizable"] = r.stabilizable;
  json failing = json::array();
  for (const auto& lam : r.failing) failing.push_back({lam.real(), lam.imag()});
  j["failing_eigenvalues"] = failing;
  json tested = json::array();
  for (const auto& lam : r.tested) tested.push_back({lam.real(), lam.imag()});
  j["tested_eigenvalues"] = tested;
  j["verdict"] = r.stabilizable ? "pass" : "fail";
  write_report(c, j,
               "rank test on [A - lambda I | B] at every eigenvalue in the closed right "
               "half-plane; full rank everywhere means the pair is stabilizable");
  return r.stabilizable ? 0 : 1;
}

int run_lyapeq(const CommonOpts& c, const std::string& a_text, const std::string& q_text) {
  lyap::Mat a = parse_matrix_arg(a_text);
  lyap::Mat q = q_text.empty() ? lyap::Mat::identity(a.rows) : parse_matrix_arg(q_text);
  lyap::Mat p = lyap::solve_lyapunov_eq(a, q);
  const lyap::Mat residual = a.transposed() * p + p * a + q;
  json j;
  j["check"] = "lyapunov-equation";
  j["P"] = matrix_json(p);
  j["residual_fro"] = residual.frobenius();
  j["min_eigenvalue"] = lyap::symmetric_eigenvalues(p).front();
  j["verdict"] = "pass";
  write_report(c, j,
               "solves A'P + PA = -Q through the dense Kronecker-sum system and verifies "
               "the residual and positive definiteness of P");
  return 0;
}

int run_portrait(const CommonOpts& c, const std::string& catalog_id, const std::string& file,
                 int lattice, double box, double t_final, bool svg) {
  LoadedSystem t = load_target(catalog_id, file);
  if (t.system.n != 2) throw std::runtime_error("portrait mode requires a planar system");
  lyap::IntegrateOptions opt;
  opt.conv_eps = 1e-6;
  auto files = lyap::export_portrait(lyap::autonomous_field(t.system),
                                     lyap::lattice_points(box, lattice), t_final, c.out_dir, opt,
                                     svg, box);
  json j;
  j["check"] = "portrait";
  j["trajectories"] = files.csv_paths.size();
  j["converged"] = files.converged;
  j["index"] = files.index_path;
  if (!files.svg_path.empty()) j["svg"] = files.svg_path;
  j["verdict"] = "pass";
  write_report(c, j, "integrates a lattice of initial conditions and exports the bundle");
  return 0;
}

int run_catalog(const CommonOpts& c, const std::string& action, const std::string& id_or_dir) {
  if (action == "list") {
    for (const auto& id : lyap::catalog_ids()) std::cout << id << "\n";
    return 0;
  }
  if (action == "show") {
    const auto& e = lyap::catalog_get(id_or_dir);
    lyap::SystemFile f{e.system, e.certificates};
    json j = lyap::to_json(f);
    j["id"] = e.id;
    j["note"] = e.note;
    j["expected"] = e.expected;
    std::cout << j.dump(2) << std::endl;
    return 0;
  }
  if (action == "export") {
    const std::string dir = id_or_dir.empty() ? c.out_dir : id_or_dir;
    std::filesystem::create_directories(dir);
    for (const auto& e : lyap::catalog_all()) {
      lyap::SystemFile f{e.system, e.certificates};
      json j = lyap::to_json(f);
      j["id"] = e.id;
      j["note"] = e.note;
      j["expected"] = e.expected;
      std::ofstream out(std::filesystem::path(dir) / (e.id + ".json"));
      out << j.dump(2) << "\n";
    }
    return 0;
  }
  std::cerr << "unknown catalog action: " << action << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical Lyapunov certificate and convexity obstruction toolkit"};
  app.require_subcommand(1);

  CommonOpts c;

  std::string catalog_id, system_file, cert_name, check = "lyapunov", mode = "chord";
  bool exponential = false;
  auto* verify = app.add_subcommand("verify", "verify a certificate against a system");
  add_common(verify, c);
  verify->add_option("--catalog", catalog_id, "catalog entry id");
  verify->add_option("--system", system_file, "system-definition file");
  verify->add_option("--cert", cert_name, "certificate name (default: first)");
  verify->add_option("--check", check, "lyapunov | convex | gconvex");
  verify->add_option("--mode", mode, "chord | hessian (for --check convex)");
  verify->add_flag("--exponential", exponential,
                   "stricter decrease condition <grad V, F> <= -V");

  auto* obstruct = app.add_subcommand("obstruct", "search for convex-certificate obstructions");
  add_common(obstruct, c);
  obstruct->add_option("--catalog", catalog_id, "catalog entry id");
  obstruct->add_option("--system", system_file, "system-definition file");

  std::string from, to, cert1, cert2;
  int s_grid = 101;
  auto* homotopy = app.add_subcommand("homotopy", "build and verify the two-field chain");
  add_common(homotopy, c);
  homotopy->add_option("--from", from, "catalog id or system file")->required();
  homotopy->add_option("--to", to, "catalog id or system file")->required();
  homotopy->add_option("--cert1", cert1, "certificate name on the first system");
  homotopy->add_option("--cert2", cert2, "certificate name on the second system");
  homotopy->add_option("--sgrid", s_grid, "number of s values");

  std::string x0_text;
  double t_final = 10.0;
  auto* sontag = app.add_subcommand("sontag", "synthesize the universal feedback");
  add_common(sontag, c);
  sontag->add_option("--catalog", catalog_id, "catalog entry id");
  sontag->add_option("--system", system_file, "system-definition file");
  sontag->add_option("--cert", cert_name, "certificate name");
  sontag->add_option("--x0", x0_text, "initial state for a closed-loop run, comma separated");
  sontag->add_option("--tfinal", t_final, "closed-loop horizon");

  std::string g_text = "1,0";
  double level = 1.0;
  auto* singular = app.add_subcommand("singular", "trace the levelset singularity locus");
  add_common(singular, c);
  singular->add_option("--catalog", catalog_id, "catalog entry id");
  singular->add_option("--system", system_file, "system-definition file");
  singular->add_option("--cert", cert_name, "certificate name");
  singular->add_option("--g", g_text, "constant input direction, comma separated");
  singular->add_option("--level", level, "levelset value c > 0");

  std::string a_text, b_text, q_text;
  auto* hautus = app.add_subcommand("hautus", "PBH stabilizability test");
  add_common(hautus, c);
  hautus->add_option("--A", a_text, "state matrix, '0,1;0,0' or JSON")->required();
  hautus->add_option("--B", b_text, "input matrix")->required();

  auto* lyapeq = app.add_subcommand("lyapeq", "solve the Lyapunov matrix equation");
  add_common(lyapeq, c);
  lyapeq->add_option("--A", a_text, "Hurwitz state matrix")->required();
  lyapeq->add_option("--Q", q_text, "symmetric positive definite right-hand side (default I)");

  int lattice = 12;
  double box = 3.0;
  double portrait_t = 200.0;
  bool svg = false;
  auto* portrait = app.add_subcommand("portrait", "export a trajectory bundle");
  add_common(portrait, c);
  portrait->add_option("--catalog", catalog_id, "catalog entry id");
  portrait->add_option("--system", system_file, "system-definition file");
  portrait->add_option("--lattice", lattice, "initial conditions per side");
  portrait->add_option("--box", box, "lattice half-width");
  portrait->add_option("--tfinal", portrait_t, "integration horizon");
  portrait->add_flag("--svg", svg, "also write portrait.svg");

  std::string cat_action = "list", cat_arg;
  auto* catalog = app.add_subcommand("catalog", "list, show or export the built-in systems");
  add_common(catalog, c);
  catalog->add_option("action", cat_action, "list | show | export");
  catalog->add_option("arg", cat_arg, "entry id (show) or directory (export)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(verify))
      return run_verify(c, catalog_id, system_file, cert_name, check, mode, exponential);
    if (app.got_subcommand(obstruct)) return run_obstruct(c, catalog_id, system_file);
    if (app.got_subcommand(homotopy)) return run_homotopy(c, from, to, cert1, cert2, s_grid);
    if (app.got_subcommand(sontag))
      return run_sontag(c, catalog_id, system_file, cert_name, x0_text, t_final);
    if (app.got_subcommand(singular))
      return run_singular(c, catalog_id, system_file, cert_name, g_text, level);
    if (app.got_subcommand(hautus)) return run_hautus(c, a_text, b_text);
    if (app.got_subcommand(lyapeq)) return run_lyapeq(c, a_text, q_text);
    if (app.got_subcommand(portrait))
      return run_portrait(c, catalog_id, system_file, lattice, box, portrait_t, svg);
    if (app.got_subcommand(catalog)) return run_catalog(c, cat_action, cat_arg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
