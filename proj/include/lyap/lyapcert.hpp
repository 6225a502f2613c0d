#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <tuple>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lyap/expr.hpp"
#include "lyap/linalg.hpp"
#include "lyap/pattern.hpp"
#include "lyap/report.hpp"
#include "lyap/sample.hpp"
#include "lyap/system.hpp"

namespace lyap {

struct PreconditionError : std::runtime_error {
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

// Default tolerances sit above the dual-number noise floor and below every
// margin that occurs in the bundled systems.
struct VerifyTolerances {
  double pos = 1e-10;
  double zero = 1e-10;
  double dec = 1e-9;
  double convex = 1e-9;
};

enum class ConvexityMode { chord, hessian };

// --- margin evaluators -------------------------------------------------
// Shared by the sampling sweeps and by standalone witness re-evaluation,
// so a reported violation always reproduces.

inline double positivity_margin(const ScalarCertificate& v, std::span<const double> x,
                                const VerifyTolerances& tol) {
  return tol.pos - eval(v.body, x);
}

inline double decrease_margin(const ScalarCertificate& v, const SystemDef& s,
                              std::span<const double> x, const VerifyTolerances& tol) {
  GradResult g = eval_grad(v.body, x);
  Vec f = drift_at(s, x);
  const double nf = norm2(f);
  const double nx = norm2(x);
  return dot(g.gradient, f) + tol.dec * nx * std::min(1.0, nf);
}

// stricter optional mode: <grad V, F> <= -V implies the plain decrease
// condition wherever V > 0
inline double exponential_decrease_margin(const ScalarCertificate& v, const SystemDef& s,
                                          std::span<const double> x,
                                          const VerifyTolerances& tol) {
  GradResult g = eval_grad(v.body, x);
  Vec f = drift_at(s, x);
  return dot(g.gradient, f) + g.value - tol.dec;
}

inline double chord_margin(const Expr& body, std::span<const double> x,
                           std::span<const double> y, const VerifyTolerances& tol) {
  Vec mid(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mid[i] = 0.5 * (x[i] + y[i]);
  return eval(body, mid) - 0.5 * eval(body, x) - 0.5 * eval(body, y) - tol.convex;
}

inline double gradient_inequality_margin(const Expr& body, std::span<const double> x,
                                         std::span<const double> y,
                                         const VerifyTolerances& tol) {
  GradResult g = eval_grad(body, x);
  double lin = eval(body, x);
  for (std::size_t i = 0; i < x.size(); ++i) lin += g.gradient[i] * (y[i] - x[i]);
  return lin - eval(body, y) - tol.convex;
}

inline double hessian_margin(const Expr& body, std::span<const double> x,
                             const VerifyTolerances& tol) {
  HessResult h = eval_hess(body, x);
  Vec ev = symmetric_eigenvalues(h.hessian);
  return -(ev.front() + tol.convex);
}

// --- Lyapunov property check -------------------------------------------

inline CertificateReport verify_lyapunov(const ScalarCertificate& v, const SystemDef& s,
                                         const SamplePlan& plan,
                                         const VerifyTolerances& tol = {},
                                         bool exponential = false) {
  if (!s.autonomous()) throw PreconditionError("verify_lyapunov requires an autonomous system");
  if (v.n != s.n) throw PreconditionError("certificate and system dimensions differ");

  CertificateReport rep;
  rep.check = exponential ? "lyapunov-exponential" : "lyapunov";
  rep.seed = plan.seed;
  rep.tolerance = tol.dec;

  const std::vector<Vec> samples = annulus_samples(plan);
  rep.samples_used = static_cast<long>(samples.size());

  // ties break toward the smaller sample index so the report does not
  // depend on the thread count
  struct Worst {
    double margin = -std::numeric_limits<double>::infinity();
    Vec x;
    std::size_t index = SIZE_MAX;

    bool beats(const Worst& other) const {
      return margin > other.margin || (margin == other.margin && index < other.index);
    }
  };
  struct Err {
    Vec x;
    std::string what;
    std::size_t index = SIZE_MAX;
  };
  Worst dec, pos;
  std::optional<Err> domain_failure;
  std::mutex mu;

  parallel_for(samples.size(), plan.threads, [&](std::size_t lo, std::size_t hi) {
    Worst local_dec, local_pos;
    std::optional<Err> local_err;
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        const double pm = positivity_margin(v, samples[i], tol);
        if (pm > local_pos.margin) local_pos = {pm, samples[i], i};
        const double dm = exponential ? exponential_decrease_margin(v, s, samples[i], tol)
                                      : decrease_margin(v, s, samples[i], tol);
        if (dm > local_dec.margin) local_dec = {dm, samples[i], i};
      } catch (const EvalError& e) {
        if (!local_err) local_err = {samples[i], e.what(), i};
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    if (local_dec.beats(dec)) dec = std::move(local_dec);
    if (local_pos.beats(pos)) pos = std::move(local_pos);
    if (local_err && (!domain_failure || local_err->index < domain_failure->index))
      domain_failure = std::move(local_err);
  });

  if (domain_failure) {
    rep.verdict = Verdict::inconclusive;
    rep.witness = domain_failure->x;
    rep.context = "domain error: " + domain_failure->what;
    return rep;
  }

  // V(0) = 0 within tolerance
  Vec origin(static_cast<std::size_t>(s.n), 0.0);
  double zero_margin;
  try {
    zero_margin = eval(v.body, origin) - tol.zero;
  } catch (const EvalError& e) {
    rep.verdict = Verdict::inconclusive;
    rep.witness = origin;
    rep.context = std::string("domain error at origin: ") + e.what();
    return rep;
  }

  // Radial unboundedness heuristic: V strictly increases along sampled
  // rays across octave-spaced radii beyond r_max. A finite sampler cannot
  // certify coercivity; this is labeled a heuristic in the context.
  Worst ray;
  const auto dirs = sphere_directions(plan, std::min(64, std::max(8, plan.angular)));
  const double octaves[4] = {1.0, 2.0, 4.0, 8.0};
  for (const Vec& d : dirs) {
    double prev = 0.0;
    bool first = true;
    for (double mult : octaves) {
      Vec x = scaled(plan.r_max * mult, d);
      double val;
      try {
        val = eval(v.body, x);
      } catch (const EvalError& e) {
        rep.verdict = Verdict::inconclusive;
        rep.witness = x;
        rep.context = std::string("domain error on ray: ") + e.what();
        return rep;
      }
      if (!first) {
        const double margin = prev - val;  // needs to be < 0
        if (margin > ray.margin) ray = {margin, x};
      }
      prev = val;
      first = false;
    }
  }

  const bool pos_ok = pos.margin <= 0.0;
  const bool dec_ok = dec.margin <= 0.0;
  const bool zero_ok = zero_margin <= 0.0;
  const bool ray_ok = ray.margin < 0.0;

  if (pos_ok && dec_ok && zero_ok && ray_ok) {
    rep.verdict = Verdict::pass;
    rep.worst_margin = dec.margin;
    rep.witness = dec.x;
    rep.context = "decrease";
    return rep;
  }
  rep.verdict = Verdict::fail;
  // report the most violated condition
  rep.worst_margin = dec.margin;
  rep.witness = dec.x;
  rep.context = "decrease";
  if (!pos_ok && pos.margin > rep.worst_margin) {
    rep.worst_margin = pos.margin;
    rep.witness = pos.x;
    rep.context = "positivity";
  }
  if (!zero_ok && zero_margin > rep.worst_margin) {
    rep.worst_margin = zero_margin;
    rep.witness = origin;
    rep.context = "value at origin";
  }
  if (!ray_ok && ray.margin > rep.worst_margin) {
    rep.worst_margin = ray.margin;
    rep.witness = ray.x;
    rep.context = "radial unboundedness (heuristic)";
  }
  return rep;
}

// --- convexity ----------------------------------------------------------

inline CertificateReport verify_convexity(const ScalarCertificate& v, const SamplePlan& plan,
                                          ConvexityMode mode = ConvexityMode::chord,
                                          const VerifyTolerances& tol = {},
                                          bool include_axis_pairs = true) {
  CertificateReport rep;
  rep.check = mode == ConvexityMode::chord ? "convexity-chord" : "convexity-hessian";
  rep.seed = plan.seed;
  rep.tolerance = tol.convex;

  const std::vector<Vec> samples = annulus_samples(plan);

  if (mode == ConvexityMode::hessian) {
    rep.samples_used = static_cast<long>(samples.size());
    double worst = -std::numeric_limits<double>::infinity();
    Vec wx;
    std::size_t widx = SIZE_MAX;
    std::optional<std::tuple<Vec, std::string, std::size_t>> err;
    std::mutex mu;
    parallel_for(samples.size(), plan.threads, [&](std::size_t lo, std::size_t hi) {
      double lw = -std::numeric_limits<double>::infinity();
      Vec lx;
      std::size_t li = SIZE_MAX;
      std::optional<std::tuple<Vec, std::string, std::size_t>> lerr;
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          const double m = hessian_margin(v.body, samples[i], tol);
          if (m > lw) { lw = m; lx = samples[i]; li = i; }
        } catch (const EvalError& e) {
          if (!lerr) lerr = {samples[i], e.what(), i};
        }
      }
      std::lock_guard<std::mutex> lock(mu);
      if (lw > worst || (lw == worst && li < widx)) {
        worst = lw;
        wx = std::move(lx);
        widx = li;
      }
      if (lerr && (!err || std::get<2>(*lerr) < std::get<2>(*err))) err = std::move(lerr);
    });
    if (err) {
      rep.verdict = Verdict::inconclusive;
      rep.witness = std::get<0>(*err);
      rep.context = "domain error: " + std::get<1>(*err);
      return rep;
    }
    rep.verdict = worst <= 0.0 ? Verdict::pass : Verdict::fail;
    rep.worst_margin = worst;
    rep.witness = wx;
    rep.context = "hessian minimum eigenvalue";
    return rep;
  }

  const auto pairs = chord_pairs(plan, samples, include_axis_pairs);
  rep.samples_used = static_cast<long>(pairs.size());
  double worst = -std::numeric_limits<double>::infinity();
  Vec wx, wy;
  std::size_t widx = SIZE_MAX;
  std::string which = "chord";
  std::optional<std::tuple<Vec, std::string, std::size_t>> err;
  std::mutex mu;
  parallel_for(pairs.size(), plan.threads, [&](std::size_t lo, std::size_t hi) {
    double lw = -std::numeric_limits<double>::infinity();
    Vec lx, ly;
    std::size_t li = SIZE_MAX;
    std::string lwhich;
    std::optional<std::tuple<Vec, std::string, std::size_t>> lerr;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& [x, y] = pairs[i];
      try {
        const double cm = chord_margin(v.body, x, y, tol);
        if (cm > lw) { lw = cm; lx = x; ly = y; li = i; lwhich = "chord"; }
        const double g1 = gradient_inequality_margin(v.body, x, y, tol);
        if (g1 > lw) { lw = g1; lx = x; ly = y; li = i; lwhich = "gradient inequality"; }
        const double g2 = gradient_inequality_margin(v.body, y, x, tol);
        if (g2 > lw) { lw = g2; lx = y; ly = x; li = i; lwhich = "gradient inequality"; }
      } catch (const EvalError& e) {
        if (!lerr) lerr = {x, e.what(), i};
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    if (lw > worst || (lw == worst && li < widx)) {
      worst = lw;
      wx = std::move(lx);
      wy = std::move(ly);
      widx = li;
      which = lwhich;
    }
    if (lerr && (!err || std::get<2>(*lerr) < std::get<2>(*err))) err = std::move(lerr);
  });
  if (err) {
    rep.verdict = Verdict::inconclusive;
    rep.witness = std::get<0>(*err);
    rep.context = "domain error: " + std::get<1>(*err);
    return rep;
  }
  rep.verdict = worst <= 0.0 ? Verdict::pass : Verdict::fail;
  rep.worst_margin = worst;
  rep.witness = wx;
  rep.witness_partner = wy;
  rep.context = which;
  return rep;
}

// --- geodesic convexity via a pullback metric ----------------------------

struct DiffeoCheck {
  bool ok = true;
  double worst_roundtrip = 0.0;
  Vec worst_point;
  double worst_condition = 1.0;
};

inline DiffeoCheck check_diffeo(const DiffeoDef& phi, const SamplePlan& plan) {
  DiffeoCheck c;
  const auto samples = annulus_samples(plan);
  for (const Vec& x : samples) {
    Vec fwd = map_point(phi.forward, x);
    Vec back = map_point(phi.inverse, fwd);
    double err = norm2(sub(back, x));
    Vec inv = map_point(phi.inverse, x);
    Vec again = map_point(phi.forward, inv);
    err = std::max(err, norm2(sub(again, x)));
    if (err > c.worst_roundtrip) {
      c.worst_roundtrip = err;
      c.worst_point = x;
    }
    const double cond = condition_number(map_jacobian(phi.forward, x));
    if (cond > c.worst_condition) c.worst_condition = cond;
  }
  c.ok = c.worst_roundtrip <= 1e-8 && std::isfinite(c.worst_condition);
  return c;
}

// Convexity of y -> V(Phi^-1(y)), i.e. convexity along the geodesics
// gamma(t) = Phi^-1((1-t) Phi(x) + t Phi(y)) of the pullback metric. The
// pullback is formed by substituting Phi^-1 into the certificate, so the
// identity diffeomorphism degenerates to plain verify_convexity.
inline CertificateReport verify_gconvex(const ScalarCertificate& v, const DiffeoDef& phi,
                                        const SamplePlan& plan,
                                        const VerifyTolerances& tol = {}) {
  const DiffeoCheck c = check_diffeo(phi, plan);
  if (!c.ok) {
    std::string msg = "diffeomorphism round-trip failed: error " +
                      std::to_string(c.worst_roundtrip) + " at (";
    for (std::size_t i = 0; i < c.worst_point.size(); ++i) {
      if (i) msg += ", ";
      msg += std::to_string(c.worst_point[i]);
    }
    msg += ")";
    throw PreconditionError(msg);
  }
  ScalarCertificate pulled;
  pulled.n = v.n;
  pulled.name = v.name + " (pullback)";
  pulled.body = substitute_vars(v.body, phi.inverse);
  // no exact-axis chord pairs: the pullback may kink there by construction
  CertificateReport rep = verify_convexity(pulled, plan, ConvexityMode::chord, tol, false);
  rep.check = "gconvex";
  rep.context += "; diffeo worst roundtrip " + std::to_string(c.worst_roundtrip) +
                 ", worst condition " + std::to_string(c.worst_condition);
  return rep;
}

// --- Legendre-Fenchel conjugate ------------------------------------------

struct FenchelSearch {
  double box_halfwidth = 10.0;
  int grid_per_dim = 33;
  int max_refine_iters = 500;
  double step_min = 1e-11;
};

struct FenchelResult {
  double value = 0.0;
  Vec argmax;
  bool on_boundary = false;   // argmax hit the search box: box too small
};

// sup over the box of <y, x> - V(x), coarse grid then pattern-search
// refinement. For a nonconvex V this is the conjugate of the convex
// envelope restricted to the box.
inline FenchelResult fenchel_conjugate(const ScalarCertificate& v, const Vec& y,
                                       const FenchelSearch& search = {}) {
  const std::size_t n = y.size();
  const double b = search.box_halfwidth;
  auto neg_objective = [&](const Vec& x) {
    double s = -eval(v.body, x);
    for (std::size_t i = 0; i < n; ++i) s += y[i] * x[i];
    return -s;
  };

  Vec best(n, 0.0);
  double best_val = neg_objective(best);
  if (n <= 3) {
    const int g = search.grid_per_dim;
    std::vector<int> idx(n, 0);
    for (;;) {
      Vec x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = -b + 2.0 * b * idx[i] / (g - 1);
      const double val = neg_objective(x);
      if (val < best_val) { best_val = val; best = x; }
      std::size_t k = 0;
      while (k < n && ++idx[k] == g) idx[k++] = 0;
      if (k == n) break;
    }
  } else {
    SamplePlan p;
    p.dim = static_cast<int>(n);
    p.r_min = 1e-3;
    p.r_max = b;
    p.total = 20000;
    for (const Vec& x : annulus_samples(p)) {
      const double val = neg_objective(x);
      if (val < best_val) { best_val = val; best = x; }
    }
  }

  auto clamp_box = [b](Vec& x) {
    for (double& c : x) c = std::clamp(c, -b, b);
  };
  auto r = pattern_search(neg_objective, best, b / std::max(1, search.grid_per_dim - 1),
                          search.step_min, search.max_refine_iters, clamp_box);
  FenchelResult out;
  out.value = -r.value;
  out.argmax = r.x;
  for (double c : out.argmax)
    if (std::abs(std::abs(c) - b) < 1e-9) out.on_boundary = true;
  return out;
}

// --- conic scaling invariance ---------------------------------------------

inline CertificateReport scale_invariance_check(const ScalarCertificate& v, const SystemDef& s,
                                                const std::vector<double>& thetas,
                                                const SamplePlan& plan,
                                                const VerifyTolerances& tol = {}) {
  CertificateReport out = verify_lyapunov(v, s, plan, tol);
  out.check = "scale-invariance";
  out.context = "theta=1: " + out.context;
  for (double theta : thetas) {
    CertificateReport r = verify_lyapunov(v, scaled_system(s, theta), plan, tol);
    if (r.verdict != Verdict::pass &&
        (out.verdict == Verdict::pass || r.worst_margin > out.worst_margin)) {
      out.verdict = r.verdict;
      out.worst_margin = r.worst_margin;
      out.witness = r.witness;
      out.context = "theta=" + std::to_string(theta) + ": " + r.context;
    }
  }
  return out;
}

}  // namespace lyap
