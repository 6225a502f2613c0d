#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lyap/expr.hpp"
#include "lyap/linalg.hpp"
#include "lyap/lyapcert.hpp"
#include "lyap/sample.hpp"
#include "lyap/system.hpp"

namespace lyap {

/// L_X h (x) = <grad h(x), X(x)>, with the gradient from the dual pass.
inline double lie_derivative(const ScalarCertificate& h, const std::vector<Expr>& field,
                             std::span<const double> x) {
  GradResult g = eval_grad(h.body, x);
  double s = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) s += g.gradient[i] * eval(field[i], x);
  return s;
}

// --- Sontag universal feedback -----------------------------------------

struct SontagEval {
  double u = 0.0;
  double lf = 0.0;           // L_f V
  double lg = 0.0;           // L_g V
  bool near_singular = false;  // |L_g V| inside the flagged band
};

struct FeedbackLaw {
  SystemDef system;             // single input control-affine system
  ScalarCertificate certificate;
  double branch_eps = 1e-12;    // below this, the u = 0 branch applies
  double flag_band = 1e-9;      // |L_g V| in (branch_eps, flag_band): flagged

  SontagEval evaluate(std::span<const double> x) const {
    SontagEval e;
    GradResult g = eval_grad(certificate.body, x);
    for (int i = 0; i < system.n; ++i) {
      e.lf += g.gradient[static_cast<std::size_t>(i)] * eval(system.drift[i], x);
      e.lg += g.gradient[static_cast<std::size_t>(i)] * eval(system.inputs[0][i], x);
    }
    if (std::abs(e.lg) > branch_eps) {
      e.u = -(e.lf + std::sqrt(e.lf * e.lf + e.lg * e.lg * e.lg * e.lg)) / e.lg;
      e.near_singular = std::abs(e.lg) < flag_band;
    }
    return e;
  }

  double operator()(std::span<const double> x) const { return evaluate(x).u; }

  FieldFn closed_loop() const {
    return closed_loop_field(system, [law = *this](std::span<const double> x) { return law(x); });
  }
};

/// Sontag's universal formula for a single-input control-affine system.
/// The CLF precondition (L_g V = 0 implies L_f V < 0) is checked over the
/// plan samples; a violation rejects with the witness.
inline FeedbackLaw sontag_feedback(const SystemDef& s, const ScalarCertificate& v,
                                   const SamplePlan& plan) {
  if (s.m != 1) throw PreconditionError("sontag_feedback: single-input systems only");
  if (v.n != s.n) throw PreconditionError("sontag_feedback: dimension mismatch");
  FeedbackLaw law{s, v};
  for (const Vec& x : annulus_samples(plan)) {
    const SontagEval e = law.evaluate(x);
    if (std::abs(e.lg) < 1e-9 && e.lf >= -1e-9) {
      std::string msg = "sontag_feedback: not a CLF at (";
      for (std::size_t i = 0; i < x.size(); ++i)
        msg += (i ? ", " : "") + std::to_string(x[i]);
      msg += "): L_gV = " + std::to_string(e.lg) + ", L_fV = " + std::to_string(e.lf);
      throw PreconditionError(msg);
    }
  }
  return law;
}

// --- small control property ------------------------------------------------

struct SmallControlPoint {
  double delta = 0.0;
  double required_u = 0.0;   // infinity when no input can achieve decrease
};

struct SmallControlProfile {
  std::vector<SmallControlPoint> points;   // ordered as the input radii list
  bool scp_holds = false;                  // empirical trend, not a proof
  double margin_frac = 0.1;
};

/// For each radius, the largest over the sphere of the minimal |u| that
/// achieves L_f V + u L_g V < 0 (scaled by 1 + margin_frac). The small
/// control property holds empirically when the profile decays to zero as
/// delta does.
inline SmallControlProfile small_control_profile(const SystemDef& s, const ScalarCertificate& v,
                                                 const std::vector<double>& radii,
                                                 const SamplePlan& plan,
                                                 double margin_frac = 0.1) {
  if (s.m != 1) throw PreconditionError("small_control_profile: single-input systems only");
  SmallControlProfile profile;
  profile.margin_frac = margin_frac;
  FeedbackLaw law{s, v};
  const auto dirs = sphere_directions(plan, plan.dim == 1 ? 2 : 64);
  for (double delta : radii) {
    SmallControlPoint pt;
    pt.delta = delta;
    for (const Vec& d : dirs) {
      const Vec x = scaled(delta, d);
      const SontagEval e = law.evaluate(x);
      double need;
      if (e.lf < 0.0) {
        need = 0.0;
      } else if (std::abs(e.lg) <= law.branch_eps) {
        need = std::numeric_limits<double>::infinity();
      } else {
        need = (e.lf / std::abs(e.lg)) * (1.0 + margin_frac);
      }
      pt.required_u = std::max(pt.required_u, need);
    }
    profile.points.push_back(pt);
  }
  // monotone trend toward zero across the (decreasing) radii list
  bool finite = true, decreasing = true;
  for (std::size_t i = 0; i < profile.points.size(); ++i) {
    if (std::isinf(profile.points[i].required_u)) finite = false;
    if (i > 0 && profile.points[i].required_u > profile.points[i - 1].required_u + 1e-12)
      decreasing = false;
  }
  const double first = profile.points.empty() ? 0.0 : profile.points.front().required_u;
  const double last = profile.points.empty() ? 0.0 : profile.points.back().required_u;
  profile.scp_holds = finite && decreasing && (last <= 1e-9 || last <= 0.1 * first);
  return profile;
}

// --- levelset singularity locus ---------------------------------------------

struct LocusPoint {
  Vec x;
  double level_residual = 0.0;   // |V(x) - c|
  double inner_product = 0.0;    // <grad V(x), g(x)>
};

struct LocusResult {
  std::vector<LocusPoint> roots;
  std::string method;   // "radial" or "marching squares"
  int trace_points = 0;
};

namespace detail {

// Solve V(r d) = c for r > 0 by bracketing and bisection. V(0) = 0 < c and
// radial unboundedness give a bracket after doubling; levels the
// certificate never reaches come back empty.
inline std::optional<double> levelset_radius(const Expr& body, const Vec& dir, double c,
                                             double tol) {
  double lo = 0.0, hi = 1.0;
  auto val = [&](double r) { return eval(body, scaled(r, dir)); };
  try {
    int doublings = 0;
    while (val(hi) < c) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 120) return std::nullopt;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (val(mid) < c) lo = mid;
      else hi = mid;
      if (hi - lo < tol * std::max(1.0, hi)) break;
    }
  } catch (const EvalError&) {
    return std::nullopt;
  }
  return 0.5 * (lo + hi);
}

// Count sign changes of V - c along the ray out to several times the first
// crossing, to detect levelsets that are not star shaped (bisection alone
// would silently pick one crossing). Records the furthest crossing seen so
// a fallback grid can be sized to cover it.
inline bool ray_has_single_crossing(const Expr& body, const Vec& dir, double c, double r_found,
                                    double* furthest_crossing = nullptr) {
  int crossings = 0;
  double prev = -c;  // V(0) - c < 0
  for (int i = 1; i <= 96; ++i) {
    const double r = r_found * 8.0 * i / 96.0;
    double v;
    try {
      v = eval(body, scaled(r, dir)) - c;
    } catch (const EvalError&) {
      break;
    }
    if ((prev < 0.0) != (v < 0.0)) {
      ++crossings;
      if (furthest_crossing) *furthest_crossing = std::max(*furthest_crossing, r);
    }
    prev = v;
  }
  return crossings <= 1;
}

}  // namespace detail

/// Roots of h = <grad V, g> on the levelset V = c of a planar certificate.
/// The levelset is traced by angular parameterization with radial bisection
/// (star-shaped levelsets); marching squares is the fallback when a ray
/// crosses the levelset more than once. At least one root exists for a
/// valid Lyapunov function and g != 0; the count is generically even.
inline LocusResult singularity_locus(const ScalarCertificate& v, const std::vector<Expr>& g,
                                     double c, int angles = 720);

namespace detail {

// drop roots that coincide with an already accepted one (angular wrap and
// grid duplicates)
inline void dedupe_roots(std::vector<LocusPoint>& roots) {
  std::vector<LocusPoint> unique;
  for (auto& r : roots) {
    bool seen = false;
    for (const auto& u : unique)
      if (norm2(sub(r.x, u.x)) <= 1e-6 * (1.0 + norm2(u.x))) {
        seen = true;
        break;
      }
    if (!seen) unique.push_back(std::move(r));
  }
  roots = std::move(unique);
}

inline LocusPoint make_locus_point(const ScalarCertificate& v, const std::vector<Expr>& g,
                                   double c, const Vec& x) {
  LocusPoint p;
  p.x = x;
  GradResult gr = eval_grad(v.body, x);
  double ip = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) ip += gr.gradient[i] * eval(g[i], x);
  p.inner_product = ip;
  p.level_residual = std::abs(gr.value - c);
  return p;
}

inline double locus_h_at_angle(const ScalarCertificate& v, const std::vector<Expr>& g, double c,
                               double theta, Vec* point_out) {
  const Vec dir{std::cos(theta), std::sin(theta)};
  auto r = levelset_radius(v.body, dir, c, 1e-13);
  if (!r) throw EvalError("levelset trace left the search range");
  Vec x = scaled(*r, dir);
  if (point_out) *point_out = x;
  GradResult gr = eval_grad(v.body, x);
  double ip = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) ip += gr.gradient[i] * eval(g[i], x);
  return ip;
}

// Newton iteration on the 2x2 system {V(x) = c, <grad V(x), g(x)> = 0}.
// Converges to tangency roots that curve-following bisection cannot reach.
inline std::optional<Vec> newton_locus_root(const ScalarCertificate& v,
                                            const std::vector<Expr>& g, double c, Vec x,
                                            double step_cap) {
  for (int it = 0; it < 60; ++it) {
    HessResult hv = eval_hess(v.body, x);
    Vec gval(2), row1(2, 0.0);
    double h = 0.0;
    for (int i = 0; i < 2; ++i) {
      gval[static_cast<std::size_t>(i)] = eval(g[static_cast<std::size_t>(i)], x);
      h += hv.gradient[static_cast<std::size_t>(i)] * gval[static_cast<std::size_t>(i)];
    }
    const double verr = hv.value - c;
    if (std::abs(verr) <= 1e-11 * std::max(1.0, c) && std::abs(h) <= 1e-10) return x;
    // grad h = Hess V * g + (Dg)^T grad V
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) row1[static_cast<std::size_t>(j)] +=
          hv.hessian(i, j) * gval[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 2; ++i) {
      GradResult gg = eval_grad(g[static_cast<std::size_t>(i)], x);
      for (int j = 0; j < 2; ++j)
        row1[static_cast<std::size_t>(j)] +=
            hv.gradient[static_cast<std::size_t>(i)] * gg.gradient[static_cast<std::size_t>(j)];
    }
    Mat jac(2, 2);
    jac(0, 0) = hv.gradient[0];
    jac(0, 1) = hv.gradient[1];
    jac(1, 0) = row1[0];
    jac(1, 1) = row1[1];
    const double det = jac(0, 0) * jac(1, 1) - jac(0, 1) * jac(1, 0);
    if (std::abs(det) < 1e-30) return std::nullopt;
    Vec step{(-verr * jac(1, 1) + h * jac(0, 1)) / det,
             (verr * jac(1, 0) - h * jac(0, 0)) / det};
    const double sn = norm2(step);
    if (sn > step_cap)
      for (double& s : step) s *= step_cap / sn;
    x[0] += step[0];
    x[1] += step[1];
  }
  return std::nullopt;
}

inline LocusResult locus_by_marching_squares(const ScalarCertificate& v,
                                             const std::vector<Expr>& g, double c,
                                             double box_halfwidth) {
  LocusResult out;
  out.method = "marching squares";
  const int cells = 400;
  const double l = box_halfwidth;
  const double cell_size = 2.0 * l / cells;
  auto coord = [&](int i) { return -l + 2.0 * l * i / cells; };
  std::vector<LocusPoint> contour;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j) {
      // sample the four cell corners, emit edge crossings of V = c
      const double x0 = coord(i), x1 = coord(i + 1);
      const double y0 = coord(j), y1 = coord(j + 1);
      const double v00 = eval(v.body, Vec{x0, y0}) - c;
      const double v10 = eval(v.body, Vec{x1, y0}) - c;
      const double v01 = eval(v.body, Vec{x0, y1}) - c;
      const double v11 = eval(v.body, Vec{x1, y1}) - c;
      auto emit = [&](double ax, double ay, double va, double bx, double by, double vb) {
        if ((va < 0.0) == (vb < 0.0)) return;
        const double t = va / (va - vb);
        contour.push_back(make_locus_point(v, g, c, Vec{ax + t * (bx - ax), ay + t * (by - ay)}));
      };
      emit(x0, y0, v00, x1, y0, v10);
      emit(x0, y0, v00, x0, y1, v01);
      emit(x1, y0, v10, x1, y1, v11);
      emit(x0, y1, v01, x1, y1, v11);
    }
  out.trace_points = static_cast<int>(contour.size());
  // order by angle and seed a Newton solve of {V = c, h = 0} from every
  // adjacent sign change of h; non-converging seeds are dropped, so folded
  // contours cannot fake a root
  std::sort(contour.begin(), contour.end(), [](const LocusPoint& a, const LocusPoint& b) {
    return std::atan2(a.x[1], a.x[0]) < std::atan2(b.x[1], b.x[0]);
  });
  for (std::size_t i = 0; i < contour.size(); ++i) {
    const auto& a = contour[i];
    const auto& b = contour[(i + 1) % contour.size()];
    if ((a.inner_product < 0.0) == (b.inner_product < 0.0)) continue;
    auto solved = newton_locus_root(v, g, c, scaled(0.5, add(a.x, b.x)), 16.0 * cell_size);
    if (!solved) continue;
    LocusPoint root = make_locus_point(v, g, c, *solved);
    if (root.level_residual <= 1e-8 && std::abs(root.inner_product) <= 1e-8)
      out.roots.push_back(std::move(root));
  }
  dedupe_roots(out.roots);
  return out;
}

}  // namespace detail

struct TracePoint {
  double theta = 0.0;
  Vec x;
  double inner_product = 0.0;
};

/// Angular trace of the levelset V = c with h = <grad V, g> at each point.
inline std::vector<TracePoint> trace_levelset(const ScalarCertificate& v,
                                              const std::vector<Expr>& g, double c,
                                              int angles = 720) {
  std::vector<TracePoint> out;
  out.reserve(static_cast<std::size_t>(angles));
  for (int k = 0; k < angles; ++k) {
    TracePoint p;
    p.theta = 2.0 * M_PI * k / angles;
    p.inner_product = detail::locus_h_at_angle(v, g, c, p.theta, &p.x);
    out.push_back(std::move(p));
  }
  return out;
}

inline LocusResult singularity_locus(const ScalarCertificate& v, const std::vector<Expr>& g,
                                     double c, int angles) {
  if (v.n != 2) throw PreconditionError("singularity_locus: planar certificates only");
  if (c <= 0.0) throw PreconditionError("singularity_locus: level must be positive");

  // reachability probe, and the bounding radius for a possible fallback
  double max_radius = 0.0;
  for (int k = 0; k < 64; ++k) {
    const double th = 2.0 * M_PI * (k + 0.173) / 64;
    const Vec dir{std::cos(th), std::sin(th)};
    auto r = detail::levelset_radius(v.body, dir, c, 1e-13);
    if (!r) throw PreconditionError("singularity_locus: level outside the certificate range");
    max_radius = std::max(max_radius, *r);
  }

  // angular trace; any ray that crosses the level more than once means the
  // levelset is not star shaped and radial bisection is unsound
  std::vector<double> h(static_cast<std::size_t>(angles));
  for (int k = 0; k < angles; ++k) {
    const double th = 2.0 * M_PI * k / angles;
    const Vec dir{std::cos(th), std::sin(th)};
    auto r = detail::levelset_radius(v.body, dir, c, 1e-13);
    if (!r) throw PreconditionError("singularity_locus: level outside the certificate range");
    max_radius = std::max(max_radius, *r);
    double furthest = *r;
    if (!detail::ray_has_single_crossing(v.body, dir, c, *r, &furthest))
      return detail::locus_by_marching_squares(v, g, c, 1.5 * std::max(max_radius, furthest));
    Vec x = scaled(*r, dir);
    GradResult gr = eval_grad(v.body, x);
    double ip = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) ip += gr.gradient[i] * eval(g[i], x);
    h[static_cast<std::size_t>(k)] = ip;
  }

  LocusResult out;
  out.method = "radial";
  out.trace_points = angles;

  for (int k = 0; k < angles; ++k) {
    const double h0 = h[static_cast<std::size_t>(k)];
    const double h1 = h[static_cast<std::size_t>((k + 1) % angles)];
    if (h0 == 0.0) {
      Vec x;
      detail::locus_h_at_angle(v, g, c, 2.0 * M_PI * k / angles, &x);
      out.roots.push_back(detail::make_locus_point(v, g, c, x));
      continue;
    }
    if ((h0 < 0.0) == (h1 < 0.0)) continue;
    double lo = 2.0 * M_PI * k / angles;
    double hi = 2.0 * M_PI * (k + 1) / angles;
    double flo = h0;
    Vec x;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = detail::locus_h_at_angle(v, g, c, mid, &x);
      if (std::abs(fm) < 1e-12) break;
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
      if (hi - lo < 1e-15) break;
    }
    out.roots.push_back(detail::make_locus_point(v, g, c, x));
  }
  detail::dedupe_roots(out.roots);
  return out;
}

}  // namespace lyap
