#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lyap/expr.hpp"
#include "lyap/linalg.hpp"

namespace lyap {

// A dynamical or control-affine system: dx/dt = drift(x) + sum_j inputs[j](x) u_j.
// Autonomous systems have m == 0. Expressions reference x-variables and
// parameters only.
struct SystemDef {
  int n = 0;
  int m = 0;
  std::map<std::string, double> params;
  std::vector<Expr> drift;                 // n expressions
  std::vector<std::vector<Expr>> inputs;   // m columns, n expressions each

  bool autonomous() const { return m == 0; }
};

struct DiffeoDef {
  std::vector<Expr> forward;   // Phi
  std::vector<Expr> inverse;   // Phi^-1, written in the same variables
};

// Candidate Lyapunov / CLF function with free-form claims metadata.
struct ScalarCertificate {
  int n = 0;
  Expr body;
  std::string name;
  std::map<std::string, std::string> claims;
  std::optional<DiffeoDef> diffeo;   // for g-convexity claims
};

using FieldFn = std::function<Vec(std::span<const double>)>;

inline Vec drift_at(const SystemDef& s, std::span<const double> x) {
  Vec f(s.drift.size());
  for (std::size_t i = 0; i < s.drift.size(); ++i) f[i] = eval(s.drift[i], x);
  return f;
}

// n x m matrix of input columns g_j(x).
inline Mat input_matrix_at(const SystemDef& s, std::span<const double> x) {
  Mat g(s.n, s.m);
  for (int j = 0; j < s.m; ++j)
    for (int i = 0; i < s.n; ++i) g(i, j) = eval(s.inputs[j][i], x);
  return g;
}

inline Vec field_at(const SystemDef& s, std::span<const double> x,
                    std::span<const double> u = {}) {
  Vec f = drift_at(s, x);
  for (int j = 0; j < s.m && j < static_cast<int>(u.size()); ++j)
    for (int i = 0; i < s.n; ++i) f[i] += eval(s.inputs[j][i], x) * u[j];
  return f;
}

inline FieldFn autonomous_field(const SystemDef& s) {
  return [s](std::span<const double> x) { return drift_at(s, x); };
}

// Closed loop under a state feedback u = k(x), single input.
inline FieldFn closed_loop_field(const SystemDef& s, std::function<double(std::span<const double>)> k) {
  return [s, k = std::move(k)](std::span<const double> x) {
    const double u = k(x);
    Vec f = drift_at(s, x);
    for (int i = 0; i < s.n; ++i) f[i] += eval(s.inputs[0][i], x) * u;
    return f;
  };
}

/// Jacobian of the field w.r.t. x; row i is the gradient of component i.
inline Mat jacobian(const SystemDef& s, std::span<const double> x,
                    std::span<const double> u = {}) {
  Mat j(s.n, s.n);
  for (int i = 0; i < s.n; ++i) {
    GradResult gr = eval_grad(s.drift[i], x);
    Vec row = std::move(gr.gradient);
    for (int c = 0; c < s.m && c < static_cast<int>(u.size()); ++c) {
      GradResult gc = eval_grad(s.inputs[c][i], x);
      for (int k = 0; k < s.n; ++k) row[k] += gc.gradient[k] * u[c];
    }
    for (int k = 0; k < s.n; ++k) j(i, k) = row[k];
  }
  return j;
}

// Autonomous system dz/dt = -grad V(z). Components are gradient nodes, so
// evaluation runs through the same dual-number path as eval_grad and agrees
// with it bit for bit.
inline SystemDef negative_gradient_field(const ScalarCertificate& v) {
  SystemDef s;
  s.n = v.n;
  s.m = 0;
  s.drift.reserve(static_cast<std::size_t>(v.n));
  for (int i = 0; i < v.n; ++i)
    s.drift.push_back(make_unary(Op::neg, make_grad_component(v.body, i)));
  return s;
}

// Linear system dx/dt = A x as expression drift, for feeding matrices into
// the expression-based checkers.
inline SystemDef linear_system(const Mat& a) {
  SystemDef s;
  s.n = a.rows;
  s.m = 0;
  for (int i = 0; i < a.rows; ++i) {
    Expr row;
    for (int j = 0; j < a.cols; ++j) {
      if (a(i, j) == 0.0) continue;
      Expr t = make_binary(Op::mul, make_const(a(i, j)), make_var(j));
      row = row ? make_binary(Op::add, row, t) : t;
    }
    if (!row) row = make_const(0.0);
    s.drift.push_back(row);
  }
  return s;
}

inline SystemDef scaled_system(const SystemDef& s, double theta) {
  SystemDef r = s;
  for (auto& d : r.drift) d = make_binary(Op::mul, make_const(theta), d);
  for (auto& col : r.inputs)
    for (auto& g : col) g = make_binary(Op::mul, make_const(theta), g);
  return r;
}

// Substitute the state variables of `body` with the given expressions
// (used for pulling a certificate back through a diffeomorphism).
inline Expr substitute_vars(const Expr& body, const std::vector<Expr>& replacement) {
  switch (body->op) {
    case Op::var_x: return replacement[static_cast<std::size_t>(body->index)];
    case Op::constant:
    case Op::param:
    case Op::var_u: return body;
    default: {
      auto n = std::make_shared<ExprNode>(*body);
      if (body->a) n->a = substitute_vars(body->a, replacement);
      if (body->b) n->b = substitute_vars(body->b, replacement);
      return n;
    }
  }
}

inline Vec map_point(const std::vector<Expr>& component_exprs, std::span<const double> x) {
  Vec y(component_exprs.size());
  for (std::size_t i = 0; i < component_exprs.size(); ++i) y[i] = eval(component_exprs[i], x);
  return y;
}

inline Mat map_jacobian(const std::vector<Expr>& component_exprs, std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  Mat j(static_cast<int>(component_exprs.size()), n);
  for (std::size_t i = 0; i < component_exprs.size(); ++i) {
    GradResult g = eval_grad(component_exprs[i], x);
    for (int k = 0; k < n; ++k) j(static_cast<int>(i), k) = g.gradient[k];
  }
  return j;
}

}  // namespace lyap
