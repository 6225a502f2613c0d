#pragma once

#include <functional>
#include <limits>

#include "lyap/linalg.hpp"

namespace lyap {

struct PatternSearchResult {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Coordinate pattern search (Hooke-Jeeves style exploratory moves only):
// probe +-step along each axis, move to the best strict improvement, halve
// the step when stuck. Derivative free; the objective may be noisy or have
// flat ridges, in which case this settles where no axis move helps.
inline PatternSearchResult pattern_search(
    const std::function<double(const Vec&)>& objective, Vec x0, double step0,
    double step_min, int max_iter,
    const std::function<void(Vec&)>& project = {}) {
  PatternSearchResult best;
  if (project) project(x0);
  best.x = std::move(x0);
  best.value = objective(best.x);
  double step = step0;
  const std::size_t n = best.x.size();
  while (best.iterations < max_iter && step > step_min) {
    ++best.iterations;
    Vec cand = best.x;
    double cand_value = best.value;
    for (std::size_t i = 0; i < n; ++i)
      for (double dir : {1.0, -1.0}) {
        Vec trial = best.x;
        trial[i] += dir * step;
        if (project) project(trial);
        const double v = objective(trial);
        if (v < cand_value) {
          cand_value = v;
          cand = std::move(trial);
        }
      }
    if (cand_value < best.value) {
      best.x = std::move(cand);
      best.value = cand_value;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

}  // namespace lyap
