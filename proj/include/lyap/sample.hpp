#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "lyap/linalg.hpp"

namespace lyap {

inline constexpr std::uint64_t kDefaultSeed = 0x51AB1E;

// Deterministic discretization of "for all x != 0": an annulus
// r_min <= |x| <= r_max covered by a polar grid in 2D (or signed radii in
// 1D) and seeded quasi-random directions otherwise. Fixed seed, fixed set.
struct SamplePlan {
  int dim = 2;
  double r_min = 1e-3;
  double r_max = 10.0;
  int radial = 100;    // rings of the 2D grid
  int angular = 100;   // points per ring
  int total = 10000;   // sample count outside the 2D grid path
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;

  static SamplePlan defaults(int dimension) {
    SamplePlan p;
    p.dim = dimension;
    return p;
  }
};

namespace detail {

// Keep samples away from the coordinate hyperplanes where abs/sign kink;
// the absolute floor also keeps removable 0/0 forms like
// sign(x)*sqrt(exp(x^2)-1) out of the floating-point dead zone where
// exp(x^2) rounds to 1 exactly.
inline void nudge_off_axes(Vec& x) {
  const double r = norm2(x);
  if (r == 0.0) return;
  const double tube = std::max(1e-7 * r, 1e-8);
  const double push = std::max(3e-7 * r, 3e-8);
  for (double& c : x)
    if (std::abs(c) < tube) c += push;
}

}  // namespace detail

inline std::vector<Vec> annulus_samples(const SamplePlan& plan) {
  if (!(plan.r_min > 0.0) || !(plan.r_max > plan.r_min))
    throw std::invalid_argument("SamplePlan: need 0 < r_min < r_max");
  std::vector<Vec> pts;
  std::mt19937_64 rng(plan.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_ratio = std::log(plan.r_max / plan.r_min);

  if (plan.dim == 1) {
    const int k = std::max(plan.radial, plan.total / 2);
    pts.reserve(static_cast<std::size_t>(2 * k));
    for (int i = 0; i < k; ++i) {
      const double t = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
      const double r = plan.r_min * std::exp(log_ratio * t);
      pts.push_back(Vec{r});
      pts.push_back(Vec{-r});
    }
    return pts;
  }

  if (plan.dim == 2 && plan.radial > 0 && plan.angular > 0) {
    pts.reserve(static_cast<std::size_t>(plan.radial) * plan.angular);
    for (int i = 0; i < plan.radial; ++i) {
      const double t = plan.radial == 1 ? 0.0 : static_cast<double>(i) / (plan.radial - 1);
      const double r = plan.r_min * std::exp(log_ratio * t);
      const double offset = unit(rng) * 2.0 * M_PI / plan.angular;
      for (int j = 0; j < plan.angular; ++j) {
        const double th = offset + 2.0 * M_PI * j / plan.angular;
        Vec x{r * std::cos(th), r * std::sin(th)};
        detail::nudge_off_axes(x);
        pts.push_back(std::move(x));
      }
    }
    return pts;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  pts.reserve(static_cast<std::size_t>(plan.total));
  for (int i = 0; i < plan.total; ++i) {
    Vec dir(static_cast<std::size_t>(plan.dim));
    double nrm = 0.0;
    do {
      for (double& c : dir) c = gauss(rng);
      nrm = norm2(dir);
    } while (nrm < 1e-12);
    const double r = plan.r_min * std::exp(log_ratio * unit(rng));
    for (double& c : dir) c *= r / nrm;
    detail::nudge_off_axes(dir);
    pts.push_back(std::move(dir));
  }
  return pts;
}

// Unit directions used for ray-based checks (radial unboundedness, rings).
inline std::vector<Vec> sphere_directions(const SamplePlan& plan, int count) {
  std::vector<Vec> dirs;
  if (plan.dim == 1) {
    dirs.push_back(Vec{1.0});
    dirs.push_back(Vec{-1.0});
    return dirs;
  }
  if (plan.dim == 2) {
    dirs.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      const double th = 2.0 * M_PI * (j + 0.318) / count;
      Vec d{std::cos(th), std::sin(th)};
      detail::nudge_off_axes(d);
      dirs.push_back(std::move(d));
    }
    return dirs;
  }
  std::mt19937_64 rng(plan.seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  dirs.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    Vec d(static_cast<std::size_t>(plan.dim));
    double nrm = 0.0;
    do {
      for (double& c : d) c = gauss(rng);
      nrm = norm2(d);
    } while (nrm < 1e-12);
    for (double& c : d) c /= nrm;
    detail::nudge_off_axes(d);
    dirs.push_back(std::move(d));
  }
  return dirs;
}

// Deterministic pairing for chord tests: a seeded derangement of the
// sample list plus, optionally, axis-aligned radius pairs so violations
// that sit on an axis are witnessed there. Callers testing functions with
// kinks on the axes (pullbacks through sign/sqrt forms) disable the axis
// pairs; the nudged samples already cover those regions.
inline std::vector<std::pair<Vec, Vec>> chord_pairs(const SamplePlan& plan,
                                                    const std::vector<Vec>& samples,
                                                    bool include_axis_pairs = true) {
  std::vector<std::pair<Vec, Vec>> pairs;
  if (include_axis_pairs && plan.dim >= 2) {
    const int radii_count = 24;
    const double log_ratio = std::log(plan.r_max / plan.r_min);
    Vec radii(radii_count);
    for (int i = 0; i < radii_count; ++i)
      radii[i] = plan.r_min * std::exp(log_ratio * i / (radii_count - 1));
    for (int axis = 0; axis < plan.dim; ++axis)
      for (int i = 0; i < radii_count; ++i)
        for (int j = i + 1; j < radii_count; ++j)
          for (double sa : {1.0, -1.0}) {
            Vec x(static_cast<std::size_t>(plan.dim), 0.0),
                y(static_cast<std::size_t>(plan.dim), 0.0);
            x[axis] = sa * radii[i];
            y[axis] = sa * radii[j];
            pairs.emplace_back(std::move(x), std::move(y));
            Vec x2(static_cast<std::size_t>(plan.dim), 0.0),
                y2(static_cast<std::size_t>(plan.dim), 0.0);
            x2[axis] = -sa * radii[i];
            y2[axis] = sa * radii[j];
            pairs.emplace_back(std::move(x2), std::move(y2));
          }
  }
  std::mt19937_64 rng(plan.seed ^ 0xC0FFEE);
  std::vector<std::size_t> perm(samples.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t j = perm[i];
    if (i == j) continue;
    pairs.emplace_back(samples[i], samples[j]);
  }
  return pairs;
}

// Parallel map with a deterministic result: work is split in fixed chunks
// and the caller reduces per-index results, so the thread count never
// changes what is reported.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t, std::size_t)>& run_range) {
  if (threads <= 1 || count < 2) {
    run_range(0, count);
    return;
  }
  const int workers = std::min<int>(threads, static_cast<int>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = static_cast<std::size_t>(w) * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&run_range, lo, hi] { run_range(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lyap
