#pragma once

#include <cmath>
#include <functional>
#include <mutex>
#include <tuple>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lyap/lyapcert.hpp"
#include "lyap/linalg.hpp"
#include "lyap/report.hpp"
#include "lyap/sample.hpp"
#include "lyap/system.hpp"

namespace lyap {

// --- canonical and geodesic inward fields ---------------------------------

/// Inverse exponential map toward the origin for the metric pulled back
/// through phi: Exp_x(v) = phi^-1(phi(x) + Dphi(x) v), so
/// Exp_x^-1(0) = Dphi(x)^-1 (phi(0) - phi(x)). Identity phi gives -x.
inline Vec geodesic_inward_field(const DiffeoDef& phi, std::span<const double> x) {
  const Mat j = map_jacobian(phi.forward, x);
  const double cond = condition_number(j);
  if (!std::isfinite(cond) || cond > 1e12)
    throw PreconditionError("geodesic_inward_field: Jacobian numerically singular, condition " +
                            std::to_string(cond));
  Vec at_zero = map_point(phi.forward, Vec(x.size(), 0.0));
  Vec at_x = map_point(phi.forward, x);
  return solve_linear(j, sub(at_zero, at_x));
}

struct CanonicalInward {};
struct GeodesicInward {
  DiffeoDef phi;
};
using InwardKind = std::variant<CanonicalInward, GeodesicInward>;

inline Vec inward_vector(const InwardKind& kind, std::span<const double> x) {
  if (std::holds_alternative<CanonicalInward>(kind)) return Vec(x.begin(), x.end());
  // inward_vector is the quantity subtracted in the blend, so it is the
  // negated inverse-exponential: -Exp_x^-1(0); identity metric gives x.
  Vec g = geodesic_inward_field(std::get<GeodesicInward>(kind).phi, x);
  for (double& c : g) c = -c;
  return g;
}

/// x -> s F(x) - (1-s) inward(x); s=1 reproduces F exactly, s=0 the inward
/// field exactly (the 0-weighted term is evaluated but contributes 0).
inline FieldFn blend_field(double s, const SystemDef& f, InwardKind inward = CanonicalInward{}) {
  if (s < 0.0 || s > 1.0) throw PreconditionError("blend_field: s must lie in [0,1]");
  return [s, f, inward = std::move(inward)](std::span<const double> x) {
    if (s == 1.0) return drift_at(f, x);
    const Vec iv = inward_vector(inward, x);
    Vec r(x.size());
    if (s == 0.0) {
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = -iv[i];
      return r;
    }
    const Vec fx = drift_at(f, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = s * fx[i] - (1.0 - s) * iv[i];
    return r;
  };
}

// --- chained homotopy -------------------------------------------------------

struct HomotopySegment {
  double s_lo = 0.0;
  double s_hi = 1.0;
  SystemDef endpoint;          // the field blended with -id on this segment
  ScalarCertificate certificate;
  std::string descriptor;
};

// Piecewise straight-line schedule between two fields through -id:
//   H(s,x) = -2 s x + (1 - 2 s) F1(x)        s in [0, 1/2]
//   H(s,x) = -(2 - 2 s) x + (2 s - 1) F2(x)  s in (1/2, 1]
// Both branches equal -x at s = 1/2.
struct HomotopyPath {
  std::vector<HomotopySegment> segments;

  const HomotopySegment& segment_at(double s) const {
    for (const auto& seg : segments)
      if (s <= seg.s_hi || &seg == &segments.back()) return seg;
    return segments.back();
  }

  Vec operator()(double s, std::span<const double> x) const {
    if (s < 0.0 || s > 1.0) throw PreconditionError("homotopy: s must lie in [0,1]");
    if (segments.size() == 1) return blend_field(s, segments[0].endpoint)(x);
    if (s <= 0.5) {
      Vec f = drift_at(segments[0].endpoint, x);
      Vec r(x.size());
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = -2.0 * s * x[i] + (1.0 - 2.0 * s) * f[i];
      return r;
    }
    Vec f = drift_at(segments[1].endpoint, x);
    Vec r(x.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = -(2.0 - 2.0 * s) * x[i] + (2.0 * s - 1.0) * f[i];
    return r;
  }
};

/// Two-segment chain F1 -> -id -> F2. Both pairs must verify as convex
/// Lyapunov certificates first; rejection names the failing check.
inline HomotopyPath build_chain_homotopy(const SystemDef& f1, const ScalarCertificate& v1,
                                         const SystemDef& f2, const ScalarCertificate& v2,
                                         const SamplePlan& plan,
                                         const VerifyTolerances& tol = {}) {
  const struct {
    const SystemDef* f;
    const ScalarCertificate* v;
    const char* which;
  } pairs[2] = {{&f1, &v1, "first"}, {&f2, &v2, "second"}};
  for (const auto& p : pairs) {
    CertificateReport lyap_rep = verify_lyapunov(*p.v, *p.f, plan, tol);
    if (!lyap_rep.passed())
      throw PreconditionError(std::string("build_chain_homotopy: ") + p.which +
                              " certificate fails the Lyapunov check (" + lyap_rep.context + ")");
    CertificateReport cvx_rep = verify_convexity(*p.v, plan, ConvexityMode::chord, tol);
    if (!cvx_rep.passed())
      throw PreconditionError(std::string("build_chain_homotopy: ") + p.which +
                              " certificate fails the convexity check (" + cvx_rep.context + ")");
  }
  HomotopyPath path;
  path.segments.push_back({0.0, 0.5, f1, v1, "blend to -id"});
  path.segments.push_back({0.5, 1.0, f2, v2, "blend from -id"});
  return path;
}

inline HomotopyPath single_segment_path(const SystemDef& f, const ScalarCertificate& v) {
  HomotopyPath path;
  path.segments.push_back({0.0, 1.0, f, v, "blend to -id"});
  return path;
}

/// Decrease of the segment certificate along H(s, .) over an s-grid times
/// the sample set; the worst (s, x) margin is reported.
inline CertificateReport verify_homotopy_stability(const HomotopyPath& path,
                                                   const SamplePlan& plan, int s_grid = 101,
                                                   const VerifyTolerances& tol = {}) {
  if (path.segments.empty()) throw PreconditionError("verify_homotopy_stability: empty path");
  for (const auto& seg : path.segments)
    if (!seg.certificate.body)
      throw PreconditionError("verify_homotopy_stability: segment certificate missing");

  CertificateReport rep;
  rep.check = "homotopy-stability";
  rep.seed = plan.seed;
  rep.tolerance = tol.dec;

  const std::vector<Vec> samples = annulus_samples(plan);
  rep.samples_used = static_cast<long>(samples.size()) * s_grid;

  double worst = -std::numeric_limits<double>::infinity();
  Vec wx;
  double ws = 0.0;
  std::size_t widx = SIZE_MAX;   // ties break toward the smaller grid index
  std::optional<std::tuple<Vec, std::string, std::size_t>> err;
  std::mutex mu;

  parallel_for(static_cast<std::size_t>(s_grid), plan.threads, [&](std::size_t lo, std::size_t hi) {
    double lw = -std::numeric_limits<double>::infinity();
    Vec lx;
    double ls = 0.0;
    std::size_t li = SIZE_MAX;
    std::optional<std::tuple<Vec, std::string, std::size_t>> lerr;
    for (std::size_t si = lo; si < hi; ++si) {
      const double s = s_grid == 1 ? 0.0 : static_cast<double>(si) / (s_grid - 1);
      const auto& seg = path.segment_at(s);
      for (std::size_t xi = 0; xi < samples.size(); ++xi) {
        const Vec& x = samples[xi];
        const std::size_t flat = si * samples.size() + xi;
        try {
          const Vec h = path(s, x);
          GradResult g = eval_grad(seg.certificate.body, x);
          const double margin =
              dot(g.gradient, h) + tol.dec * norm2(x) * std::min(1.0, norm2(h));
          if (margin > lw) { lw = margin; lx = x; ls = s; li = flat; }
        } catch (const EvalError& e) {
          if (!lerr) lerr = {x, e.what(), flat};
        }
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    if (lw > worst || (lw == worst && li < widx)) {
      worst = lw;
      wx = std::move(lx);
      ws = ls;
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
  rep.context = "decrease along blend at s=" + std::to_string(ws);
  return rep;
}

// --- compact convex sets ----------------------------------------------------

struct BallSet {
  Vec center;
  double radius = 1.0;
};
struct BoxSet {
  Vec lower, upper;
};
struct Halfspace {
  Vec normal;
  double offset = 0.0;   // a^T x <= b
};
struct PolytopeSet {
  std::vector<Halfspace> faces;
};

struct ConvexSetDef {
  std::variant<BallSet, BoxSet, PolytopeSet> shape;
};

namespace detail {

inline Vec project_ball(const BallSet& b, std::span<const double> x) {
  Vec d = sub(x, b.center);
  const double n = norm2(d);
  if (n <= b.radius) return Vec(x.begin(), x.end());
  return axpy(b.radius / n, d, b.center);
}

inline Vec project_box(const BoxSet& b, std::span<const double> x) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
  return r;
}

inline Vec project_halfspace(const Halfspace& h, std::span<const double> x) {
  const double viol = dot(h.normal, x) - h.offset;
  if (viol <= 0.0) return Vec(x.begin(), x.end());
  const double nn = dot(h.normal, h.normal);
  return axpy(-viol / nn, h.normal, x);
}

// Dykstra's alternating projections onto the halfspaces; converges to the
// Euclidean projection onto their intersection.
inline Vec project_polytope(const PolytopeSet& p, std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t k = p.faces.size();
  Vec z(x.begin(), x.end());
  std::vector<Vec> corrections(k, Vec(n, 0.0));
  const int max_sweeps = 10000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      Vec y = add(z, corrections[i]);
      Vec proj = project_halfspace(p.faces[i], y);
      for (std::size_t j = 0; j < n; ++j) {
        corrections[i][j] = y[j] - proj[j];
        moved += std::abs(proj[j] - z[j]);
      }
      z = std::move(proj);
    }
    if (moved < 1e-12) return z;
  }
  double residual = 0.0;
  for (const auto& f : p.faces)
    residual = std::max(residual, dot(f.normal, z) - f.offset);
  throw std::runtime_error("project_convex: Dykstra iteration did not converge, residual " +
                           std::to_string(residual));
}

}  // namespace detail

/// Euclidean projection onto the set: closed form for balls and boxes,
/// Dykstra sweeps for polytopes.
inline Vec project_convex(const ConvexSetDef& a, std::span<const double> x) {
  return std::visit(
      [&](const auto& shape) -> Vec {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, BallSet>) return detail::project_ball(shape, x);
        else if constexpr (std::is_same_v<T, BoxSet>) return detail::project_box(shape, x);
        else return detail::project_polytope(shape, x);
      },
      a.shape);
}

struct SetValidation {
  bool bounded = true;
  bool nonempty = true;
  Vec interior_point;
  double interior_margin = 0.0;
};

// Bounded: no sampled direction lies in the recession cone. Nonempty: a
// Chebyshev-style interior point found by derivative-free search has a
// positive margin (zero margin still counts as nonempty, not interior).
inline SetValidation validate_set(const ConvexSetDef& a, int direction_samples = 256) {
  SetValidation v;
  if (std::holds_alternative<BallSet>(a.shape)) {
    const auto& b = std::get<BallSet>(a.shape);
    v.nonempty = b.radius >= 0.0;
    v.interior_point = b.center;
    v.interior_margin = b.radius;
    return v;
  }
  if (std::holds_alternative<BoxSet>(a.shape)) {
    const auto& b = std::get<BoxSet>(a.shape);
    v.interior_point.resize(b.lower.size());
    v.interior_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.lower.size(); ++i) {
      if (b.lower[i] > b.upper[i]) v.nonempty = false;
      v.interior_point[i] = 0.5 * (b.lower[i] + b.upper[i]);
      v.interior_margin = std::min(v.interior_margin, 0.5 * (b.upper[i] - b.lower[i]));
    }
    return v;
  }
  const auto& p = std::get<PolytopeSet>(a.shape);
  const std::size_t n = p.faces.empty() ? 0 : p.faces[0].normal.size();
  SamplePlan plan;
  plan.dim = static_cast<int>(n);
  for (const Vec& d : sphere_directions(plan, direction_samples)) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& f : p.faces) best = std::max(best, dot(f.normal, d) / norm2(f.normal));
    if (best <= 1e-9) { v.bounded = false; break; }
  }
  auto neg_margin = [&](const Vec& x) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& f : p.faces)
      worst = std::min(worst, (f.offset - dot(f.normal, x)) / norm2(f.normal));
    return -worst;
  };
  // several seeds: coordinate search alone stalls on margin ridges
  double scale = 1.0;
  for (const auto& f : p.faces) scale = std::max(scale, std::abs(f.offset) / norm2(f.normal));
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(-scale, scale);
  PatternSearchResult best;
  for (int seed = 0; seed < 16; ++seed) {
    Vec x0(n, 0.0);
    if (seed > 0)
      for (double& c : x0) c = u(rng);
    auto r = pattern_search(neg_margin, std::move(x0), 0.5 * scale, 1e-10, 200);
    if (r.value < best.value) best = std::move(r);
  }
  v.interior_point = best.x;
  v.interior_margin = -best.value;
  v.nonempty = v.interior_margin >= 0.0;
  return v;
}

struct SetField {
  double s = 0.0;
  SystemDef f;
  ConvexSetDef a;

  // Defined on the exterior only; the statement is silent on A itself, so
  // evaluation inside A (projection distance <= 1e-12) is flagged.
  Vec operator()(std::span<const double> x) const {
    Vec p = project_convex(a, x);
    const Vec gap = sub(x, p);
    if (norm2(gap) <= 1e-12)
      throw PreconditionError("set_homotopy_field: point lies in the target set");
    Vec r(x.size());
    if (s == 0.0) {
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = p[i] - x[i];
      return r;
    }
    Vec fx = drift_at(f, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = s * fx[i] + (1.0 - s) * (p[i] - x[i]);
    return r;
  }
};

/// x -> s F(x) + (1-s)(Pi_A(x) - x) on the exterior of A.
inline SetField set_homotopy_field(double s, const SystemDef& f, const ConvexSetDef& a) {
  if (s < 0.0 || s > 1.0) throw PreconditionError("set_homotopy_field: s must lie in [0,1]");
  return SetField{s, f, a};
}

}  // namespace lyap
