#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/lyapcert.hpp"
#include "lyap/pattern.hpp"
#include "lyap/sample.hpp"
#include "lyap/system.hpp"

namespace lyap {

// A candidate radial fixed direction F(x) = lambda x with lambda >= 0.
// lambda is the nonnegative least-squares scalar <F,x>/<x,x> clamped at 0;
// the residual is scale free and vanishes exactly at a violation.
struct AlignmentWitness {
  Vec x;
  double lambda = 0.0;
  double alignment = -1.0;   // cosine of the angle between F(x) and x
  double residual = 1.0;     // ||F - lambda x|| / (||F|| + ||x||)
  bool field_vanishes = false;
};

inline AlignmentWitness alignment_at(const SystemDef& s, const Vec& x) {
  AlignmentWitness w;
  w.x = x;
  const Vec f = drift_at(s, x);
  const double nf = norm2(f);
  const double nx = norm2(x);
  if (nx == 0.0) return w;
  if (nf == 0.0) {
    // a nonzero equilibrium satisfies F(x) = 0 * x outright
    w.field_vanishes = true;
    w.lambda = 0.0;
    w.alignment = 1.0;
    w.residual = 0.0;
    return w;
  }
  const double fx = dot(f, x);
  w.alignment = fx / (nf * nx);
  w.lambda = std::max(0.0, fx / (nx * nx));
  w.residual = norm2(sub(f, scaled(w.lambda, x))) / (nf + nx);
  return w;
}

enum class ObstructionVerdict { violated, clear };

struct RaySearchResult {
  AlignmentWitness best;
  ObstructionVerdict verdict = ObstructionVerdict::clear;
  double grid_best_alignment = -1.0;
  long samples_used = 0;
};

struct RefineConfig {
  int max_iterations = 500;
  double tol_align = 1e-6;   // violation threshold on the residual
  int seeds = 3;
};

/// Search for violations of the convexity necessary condition
/// F(x) != lambda x (lambda >= 0): maximize the alignment cosine over the
/// annulus grid, refine the best seeds by pattern search, then polish the
/// residual when the cosine saturates. Scale invariant by construction.
inline RaySearchResult ray_alignment_search(const SystemDef& s, const SamplePlan& plan,
                                            const RefineConfig& refine = {}) {
  if (!s.autonomous()) throw PreconditionError("ray_alignment_search requires an autonomous system");
  RaySearchResult out;
  const std::vector<Vec> samples = annulus_samples(plan);
  out.samples_used = static_cast<long>(samples.size());

  std::vector<AlignmentWitness> grid(samples.size());
  parallel_for(samples.size(), plan.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) grid[i] = alignment_at(s, samples[i]);
  });

  // top seeds by alignment
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + std::min<std::size_t>(refine.seeds, order.size()),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return grid[a].alignment > grid[b].alignment;
                    });

  out.grid_best_alignment = grid.empty() ? -1.0 : grid[order[0]].alignment;
  out.best = grid.empty() ? AlignmentWitness{} : grid[order[0]];
  if (out.best.field_vanishes) {
    out.verdict = ObstructionVerdict::violated;
    return out;
  }

  auto clamp_annulus = [&](Vec& x) {
    const double r = norm2(x);
    if (r < plan.r_min) {
      if (r == 0.0) x[0] = plan.r_min;
      else for (double& c : x) c *= plan.r_min / r;
    } else if (r > plan.r_max) {
      for (double& c : x) c *= plan.r_max / r;
    }
  };

  for (std::size_t k = 0; k < std::min<std::size_t>(refine.seeds, order.size()); ++k) {
    const AlignmentWitness& seed = grid[order[k]];
    const double scale = std::max(norm2(seed.x), plan.r_min);
    const int budget = refine.max_iterations;

    // phase 1: ascend the alignment cosine
    auto neg_alignment = [&](const Vec& x) { return -alignment_at(s, x).alignment; };
    auto stage1 = pattern_search(neg_alignment, seed.x, 0.1 * scale, 1e-13 * scale,
                                 budget / 2, clamp_annulus);
    AlignmentWitness cand = alignment_at(s, stage1.x);

    // phase 2: once the cosine saturates, the residual is the better
    // conditioned objective (linear instead of quadratic near the root)
    if (cand.alignment > 1.0 - 1e-7 || cand.residual < 1e-3) {
      auto residual_obj = [&](const Vec& x) { return alignment_at(s, x).residual; };
      auto stage2 = pattern_search(residual_obj, cand.x, 1e-3 * scale, 1e-15 * scale,
                                   budget - stage1.iterations, clamp_annulus);
      AlignmentWitness polished = alignment_at(s, stage2.x);
      if (polished.residual < cand.residual) cand = polished;
    }
    if (cand.alignment > out.best.alignment ||
        (cand.residual < out.best.residual && cand.residual <= refine.tol_align))
      out.best = cand;
  }
  out.verdict = (out.best.residual <= refine.tol_align || out.best.field_vanishes)
                    ? ObstructionVerdict::violated
                    : ObstructionVerdict::clear;
  return out;
}

struct ClfScanResult {
  ObstructionVerdict verdict = ObstructionVerdict::clear;
  std::optional<Vec> witness;
  double min_input_norm = std::numeric_limits<double>::infinity();
  Vec min_input_point;          // diagnostics: where ||G|| came closest to 0
  double drift_residual_there = 1.0;
  long samples_used = 0;
};

namespace detail {

inline double input_column_norm_max(const SystemDef& s, const Vec& x) {
  double worst = 0.0;
  for (int j = 0; j < s.m; ++j) {
    double col = 0.0;
    for (int i = 0; i < s.n; ++i) {
      const double v = eval(s.inputs[j][i], x);
      col += v * v;
    }
    worst = std::max(worst, std::sqrt(col));
  }
  return worst;
}

}  // namespace detail

/// Necessary condition for a convex CLF on a control-affine system: a point
/// violates it iff every input column vanishes there and the drift is a
/// nonnegative radial multiple. Grid scan plus a pattern-search descent on
/// the combined defect, since the violating set has measure zero.
inline ClfScanResult clf_obstruction_scan(const SystemDef& s, const SamplePlan& plan,
                                          const RefineConfig& refine = {}) {
  if (s.m < 1) throw PreconditionError("clf_obstruction_scan requires m >= 1");
  ClfScanResult out;
  const std::vector<Vec> samples = annulus_samples(plan);
  out.samples_used = static_cast<long>(samples.size());

  SystemDef drift_only = s;
  drift_only.m = 0;
  drift_only.inputs.clear();

  auto defect = [&](const Vec& x) {
    const double g = detail::input_column_norm_max(s, x);
    const AlignmentWitness w = alignment_at(drift_only, x);
    return g + w.residual;
  };
  auto is_violation = [&](const Vec& x) {
    if (detail::input_column_norm_max(s, x) > 1e-10) return false;
    const AlignmentWitness w = alignment_at(drift_only, x);
    return w.residual <= refine.tol_align;
  };

  Vec best_x;
  double best_defect = std::numeric_limits<double>::infinity();
  for (const Vec& x : samples) {
    const double g = detail::input_column_norm_max(s, x);
    if (g < out.min_input_norm) {
      out.min_input_norm = g;
      out.min_input_point = x;
    }
    const double d = defect(x);
    if (d < best_defect) {
      best_defect = d;
      best_x = x;
    }
    if (is_violation(x)) {
      out.verdict = ObstructionVerdict::violated;
      out.witness = x;
      return out;
    }
  }

  auto clamp_annulus = [&](Vec& x) {
    const double r = norm2(x);
    if (r < plan.r_min) {
      if (r == 0.0) x[0] = plan.r_min;
      else for (double& c : x) c *= plan.r_min / r;
    } else if (r > plan.r_max) {
      for (double& c : x) c *= plan.r_max / r;
    }
  };
  auto refined = pattern_search(defect, best_x, 0.1 * std::max(norm2(best_x), plan.r_min),
                                1e-15, refine.max_iterations, clamp_annulus);
  const Vec& rx = refined.x;
  out.min_input_norm = std::min(out.min_input_norm, detail::input_column_norm_max(s, rx));
  if (detail::input_column_norm_max(s, rx) <= detail::input_column_norm_max(s, out.min_input_point))
    out.min_input_point = rx;
  out.drift_residual_there = alignment_at(drift_only, out.min_input_point).residual;
  if (is_violation(rx)) {
    out.verdict = ObstructionVerdict::violated;
    out.witness = rx;
  }
  return out;
}

enum class NonholonomicVerdict { obstructed, not_applicable };

struct NonholonomicResult {
  NonholonomicVerdict verdict = NonholonomicVerdict::not_applicable;
  int span_rank = 0;
  std::string reason;
};

/// Driftless system with constant input columns spanning a proper subspace
/// (1 < m < n): no smooth CLF exists. Everything is tested on samples:
/// drift == 0, column Jacobians == 0, rank of the column span by singular
/// values at 1e-9 * sigma_max.
inline NonholonomicResult nonholonomic_check(const SystemDef& s, const SamplePlan& plan) {
  NonholonomicResult out;
  if (!(s.m > 1 && s.m < s.n)) {
    out.reason = "input count must satisfy 1 < m < n";
    return out;
  }
  const std::vector<Vec> samples = annulus_samples(plan);
  for (const Vec& x : samples) {
    for (const Expr& d : s.drift)
      if (std::abs(eval(d, x)) > 1e-12) {
        out.reason = "drift is not identically zero";
        return out;
      }
    for (int j = 0; j < s.m; ++j)
      for (int i = 0; i < s.n; ++i) {
        GradResult g = eval_grad(s.inputs[j][i], x);
        for (double gc : g.gradient)
          if (std::abs(gc) > 1e-10) {
            out.reason = "input columns are not constant";
            return out;
          }
      }
  }
  Mat g(s.n, s.m);
  const Vec& x0 = samples.front();
  for (int j = 0; j < s.m; ++j)
    for (int i = 0; i < s.n; ++i) g(i, j) = eval(s.inputs[j][i], x0);
  Vec sv = singular_values(g);
  const double smax = sv.empty() ? 0.0 : sv.front();
  for (double v : sv)
    if (v > 1e-9 * smax) ++out.span_rank;
  if (out.span_rank < s.n) {
    out.verdict = NonholonomicVerdict::obstructed;
    out.reason = "zero drift, constant columns, rank " + std::to_string(out.span_rank) +
                 " < " + std::to_string(s.n);
  } else {
    out.reason = "input columns span the full space";
  }
  return out;
}

}  // namespace lyap
