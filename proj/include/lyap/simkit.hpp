#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "lyap/linalg.hpp"
#include "lyap/system.hpp"

namespace lyap {

enum class Termination { t_final, converged, diverged, step_underflow };

inline const char* to_cstring(Termination t) {
  switch (t) {
    case Termination::t_final: return "t_final";
    case Termination::converged: return "converged";
    case Termination::diverged: return "diverged";
    default: return "step_underflow";
  }
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  Termination termination = Termination::t_final;

  const Vec& back() const { return states.back(); }
  double end_time() const { return times.back(); }
};

struct IntegrateOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-9;
  double h0 = 1e-3;
  double conv_eps = 1e-6;   // stop early once ||x|| falls below; 0 disables
  double div_bound = 1e6;
  std::vector<double> sample_times;   // dense output at these times if set
};

namespace detail {

// Dormand-Prince 5(4) tableau.
constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double dp_b5[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                             -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double dp_b4[7] = {5179.0 / 57600,   0.0,        7571.0 / 16695, 393.0 / 640,
                             -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

inline Vec hermite(double t, double t0, const Vec& y0, const Vec& f0, double t1, const Vec& y1,
                   const Vec& f1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  Vec r(y0.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i];
  return r;
}

}  // namespace detail

/// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince, FSAL) with PI step
/// control. Dense output at requested sample times comes from cubic Hermite
/// interpolation between accepted steps.
inline Trajectory integrate(const FieldFn& field, Vec x0, double t_final,
                            const IntegrateOptions& opt = {}) {
  if (t_final <= 0.0) throw std::invalid_argument("integrate: t_final must be positive");
  const std::size_t n = x0.size();

  std::vector<double> knot_t{0.0};
  std::vector<Vec> knot_y{x0};
  std::vector<Vec> knot_f{field(x0)};
  Termination term = Termination::t_final;

  double t = 0.0;
  Vec y = std::move(x0);
  Vec k1 = knot_f.back();
  double h = std::min(opt.h0, t_final);
  double err_prev = 1e-4;

  if (opt.conv_eps > 0.0 && norm2(y) < opt.conv_eps) term = Termination::converged;

  while (term == Termination::t_final && t < t_final) {
    if (h < 1e-14) {
      term = Termination::step_underflow;
      break;
    }
    if (t + h > t_final) h = t_final - t;

    Vec k[7];
    k[0] = k1;
    bool eval_failed = false;
    for (int stage = 1; stage < 7; ++stage) {
      Vec ys = y;
      for (int j = 0; j < stage; ++j) {
        const double a = detail::dp_a[stage][j];
        if (a == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) ys[i] += h * a * k[j][i];
      }
      bool finite = true;
      for (double c : ys)
        if (!std::isfinite(c)) finite = false;
      if (!finite) {
        eval_failed = true;
        break;
      }
      k[stage] = field(ys);
    }
    if (eval_failed) {
      h *= 0.25;
      continue;
    }

    Vec y_new(n), err_vec(n);
    for (std::size_t i = 0; i < n; ++i) {
      double dy = 0.0, de = 0.0;
      for (int stage = 0; stage < 7; ++stage) {
        dy += detail::dp_b5[stage] * k[stage][i];
        de += (detail::dp_b5[stage] - detail::dp_b4[stage]) * k[stage][i];
      }
      y_new[i] = y[i] + h * dy;
      err_vec[i] = h * de;
    }

    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y_new[i])) finite = false;
      const double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      const double e = err_vec[i] / scale;
      err += e * e;
    }
    err = std::sqrt(err / n);

    if (!finite || err > 1.0) {
      const double shrink = finite ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
      h *= shrink;
      continue;
    }

    t += h;
    y = std::move(y_new);
    k1 = k[6];   // FSAL
    knot_t.push_back(t);
    knot_y.push_back(y);
    knot_f.push_back(k1);

    const double ny = norm2(y);
    if (opt.conv_eps > 0.0 && ny < opt.conv_eps) term = Termination::converged;
    else if (ny > opt.div_bound) term = Termination::diverged;

    const double grow = 0.9 * std::pow(err > 0.0 ? err : 1e-16, -0.17) *
                        std::pow(err_prev, 0.04);
    h *= std::clamp(grow, 0.2, 6.0);
    err_prev = std::max(err, 1e-10);
  }

  Trajectory out;
  out.termination = term;
  if (opt.sample_times.empty()) {
    out.times = std::move(knot_t);
    out.states = std::move(knot_y);
    return out;
  }
  const double t_end = knot_t.back();
  std::size_t seg = 0;
  for (double ts : opt.sample_times) {
    if (ts > t_end) break;
    if (knot_t.size() < 2) {
      out.times.push_back(t_end);
      out.states.push_back(knot_y.back());
      break;
    }
    while (seg + 1 < knot_t.size() - 1 && knot_t[seg + 1] < ts) ++seg;
    out.times.push_back(ts);
    out.states.push_back(detail::hermite(ts, knot_t[seg], knot_y[seg], knot_f[seg],
                                         knot_t[seg + 1], knot_y[seg + 1], knot_f[seg + 1]));
  }
  if (out.times.empty()) {
    out.times.push_back(t_end);
    out.states.push_back(knot_y.back());
  }
  return out;
}

/// Fixed-step classical RK4, for bit-reproducible comparisons.
inline Trajectory integrate_rk4(const FieldFn& field, Vec x0, double t_final, double h,
                                double conv_eps = 0.0, double div_bound = 1e6) {
  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(x0);
  Vec y = std::move(x0);
  const std::size_t n = y.size();
  double t = 0.0;
  while (t < t_final) {
    const double step = std::min(h, t_final - t);
    Vec k1 = field(y);
    Vec y2(n), y3(n), y4(n);
    for (std::size_t i = 0; i < n; ++i) y2[i] = y[i] + 0.5 * step * k1[i];
    Vec k2 = field(y2);
    for (std::size_t i = 0; i < n; ++i) y3[i] = y[i] + 0.5 * step * k2[i];
    Vec k3 = field(y3);
    for (std::size_t i = 0; i < n; ++i) y4[i] = y[i] + step * k3[i];
    Vec k4 = field(y4);
    for (std::size_t i = 0; i < n; ++i)
      y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t += step;
    out.times.push_back(t);
    out.states.push_back(y);
    const double ny = norm2(y);
    if (conv_eps > 0.0 && ny < conv_eps) {
      out.termination = Termination::converged;
      return out;
    }
    if (ny > div_bound) {
      out.termination = Termination::diverged;
      return out;
    }
  }
  out.termination = Termination::t_final;
  return out;
}

// --- empirical global asymptotic stability ---------------------------------

struct GasReport {
  bool pass = false;
  long trajectories = 0;
  double slowest_time = 0.0;        // largest time to reach conv_eps
  Vec slowest_start;
  double max_excursion = 0.0;       // sup over trajectories of sup_t ||x(t)||
  Vec failure_start;                // first initial condition that failed
  Termination failure_mode = Termination::t_final;
};

inline std::vector<Vec> ring_points(const std::vector<double>& radii, int angles) {
  std::vector<Vec> pts;
  for (double r : radii)
    for (int k = 0; k < angles; ++k) {
      const double th = 2.0 * M_PI * k / angles;
      pts.push_back(Vec{r * std::cos(th), r * std::sin(th)});
    }
  return pts;
}

inline std::vector<Vec> lattice_points(double halfwidth, int per_side) {
  std::vector<Vec> pts;
  for (int i = 0; i < per_side; ++i)
    for (int j = 0; j < per_side; ++j) {
      const double x = -halfwidth + 2.0 * halfwidth * i / (per_side - 1);
      const double y = -halfwidth + 2.0 * halfwidth * j / (per_side - 1);
      pts.push_back(Vec{x, y});
    }
  return pts;
}

/// Integrate from every initial condition; pass iff each trajectory reaches
/// ||x|| < conv_eps before t_final with a finite excursion.
inline GasReport empirical_gas(const FieldFn& field, const std::vector<Vec>& starts,
                               double t_final, double conv_eps,
                               IntegrateOptions opt = {}) {
  opt.conv_eps = conv_eps;
  GasReport rep;
  rep.pass = true;
  for (const Vec& x0 : starts) {
    if (norm2(x0) < conv_eps) continue;
    ++rep.trajectories;
    Trajectory tr = integrate(field, x0, t_final, opt);
    for (const Vec& st : tr.states) rep.max_excursion = std::max(rep.max_excursion, norm2(st));
    if (tr.termination != Termination::converged) {
      rep.pass = false;
      if (rep.failure_start.empty()) {
        rep.failure_start = x0;
        rep.failure_mode = tr.termination;
      }
      continue;
    }
    if (tr.end_time() > rep.slowest_time) {
      rep.slowest_time = tr.end_time();
      rep.slowest_start = x0;
    }
  }
  return rep;
}

// --- portrait export ---------------------------------------------------------

struct PortraitFiles {
  std::vector<std::string> csv_paths;
  std::string index_path;
  std::string svg_path;   // empty unless requested
  long converged = 0;
};

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One CSV per trajectory (t, x1, ..., xn at 17 significant digits), an
/// index CSV, and optionally a single SVG with all polylines.
inline PortraitFiles export_portrait(const FieldFn& field, const std::vector<Vec>& starts,
                                     double t_final, const std::string& out_dir,
                                     const IntegrateOptions& opt = {}, bool svg = false,
                                     double svg_halfwidth = 3.0) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  PortraitFiles out;
  std::vector<Trajectory> trajectories;
  trajectories.reserve(starts.size());
  for (const Vec& x0 : starts) trajectories.push_back(integrate(field, x0, t_final, opt));

  std::ofstream index(fs::path(out_dir) / "index.csv");
  index << "file,termination,t_end";
  if (!starts.empty())
    for (std::size_t i = 0; i < starts[0].size(); ++i) index << ",x0_" << (i + 1);
  index << "\n";

  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const Trajectory& tr = trajectories[ti];
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%03zu.csv", ti);
    const fs::path p = fs::path(out_dir) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("export_portrait: cannot open " + p.string());
    f << "t";
    for (std::size_t i = 0; i < starts[ti].size(); ++i) f << ",x" << (i + 1);
    f << "\n";
    for (std::size_t row = 0; row < tr.times.size(); ++row) {
      f << format_g17(tr.times[row]);
      for (double c : tr.states[row]) f << "," << format_g17(c);
      f << "\n";
    }
    out.csv_paths.push_back(p.string());
    if (tr.termination == Termination::converged) ++out.converged;
    index << name << "," << to_cstring(tr.termination) << "," << format_g17(tr.end_time());
    for (double c : starts[ti]) index << "," << format_g17(c);
    index << "\n";
  }
  out.index_path = (fs::path(out_dir) / "index.csv").string();

  if (svg) {
    const fs::path p = fs::path(out_dir) / "portrait.svg";
    std::ofstream f(p);
    const double l = svg_halfwidth;
    const int w = 800;
    auto px = [&](double v) { return (v + l) / (2.0 * l) * w; };
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << w << "\">\n";
    f << "<rect width=\"" << w << "\" height=\"" << w << "\" fill=\"white\"/>\n";
    for (const Trajectory& tr : trajectories) {
      f << "<polyline fill=\"none\" stroke=\"#30507a\" stroke-width=\"1\" points=\"";
      for (const Vec& st : tr.states)
        f << format_g17(px(st[0])) << "," << format_g17(px(-st[1])) << " ";
      f << "\"/>\n";
    }
    f << "</svg>\n";
    out.svg_path = p.string();
  }
  return out;
}

}  // namespace lyap
