#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lyap/linalg.hpp"

namespace lyap {

// Thrown when an expression cannot be evaluated at a point (log of a
// non-positive value, division by zero, fractional power of a negative
// base). Verifiers translate this into an inconclusive verdict.
struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& what, std::size_t off)
      : std::runtime_error(what + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

enum class Op : std::uint8_t {
  constant, var_x, var_u, param,
  neg, exp_fn, log_fn, sin_fn, cos_fn, sqrt_fn, abs_fn, sign_fn,
  add, sub, mul, div, pow,
  grad_component,  // partial derivative of the operand w.r.t. one state variable
};

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op;
  double value = 0.0;   // constant value, param value, or pow exponent
  int index = 0;        // variable index / gradient component (0-based)
  bool int_exponent = false;
  std::string name;     // parameter name, kept for printing
  Expr a, b;
};

inline Expr make_const(double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::constant;
  n->value = v;
  return n;
}

inline Expr make_var(int i) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::var_x;
  n->index = i;
  return n;
}

inline Expr make_input(int i) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::var_u;
  n->index = i;
  return n;
}

inline Expr make_param(std::string name, double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::param;
  n->value = v;
  n->name = std::move(name);
  return n;
}

inline Expr make_unary(Op op, Expr a) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->a = std::move(a);
  return n;
}

inline Expr make_binary(Op op, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

inline Expr make_pow(Expr base, double exponent) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::pow;
  n->a = std::move(base);
  n->value = exponent;
  n->int_exponent =
      exponent == std::floor(exponent) && std::abs(exponent) < 2147483647.0;
  return n;
}

inline Expr make_grad_component(Expr operand, int i) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::grad_component;
  n->a = std::move(operand);
  n->index = i;
  return n;
}

// ---------------------------------------------------------------------------
// Dual numbers: value plus n first-order partials.

struct Dual {
  double v = 0.0;
  Vec d;

  Dual() = default;
  Dual(double value, std::size_t n) : v(value), d(n, 0.0) {}
  static Dual seeded(double value, std::size_t n, std::size_t i) {
    Dual r(value, n);
    r.d[i] = 1.0;
    return r;
  }
};

// Second-order dual: value, gradient, dense Hessian (row-major n*n).
// Hessian updates are written symmetrically, so the extracted matrix is
// symmetric to the last bit.
struct Dual2 {
  double v = 0.0;
  Vec g;
  Vec h;

  Dual2() = default;
  Dual2(double value, std::size_t n) : v(value), g(n, 0.0), h(n * n, 0.0) {}
  static Dual2 seeded(double value, std::size_t n, std::size_t i) {
    Dual2 r(value, n);
    r.g[i] = 1.0;
    return r;
  }
};

namespace detail {

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }
inline double value_of(const Dual2& x) { return x.v; }

inline double dconst(double v, const double&) { return v; }
inline Dual dconst(double v, const Dual& like) { return Dual(v, like.d.size()); }
inline Dual2 dconst(double v, const Dual2& like) { return Dual2(v, like.g.size()); }

// arithmetic ----------------------------------------------------------------

inline Dual operator+(const Dual& a, const Dual& b) {
  Dual r = a;
  r.v += b.v;
  for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] += b.d[i];
  return r;
}
inline Dual operator-(const Dual& a, const Dual& b) {
  Dual r = a;
  r.v -= b.v;
  for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] -= b.d[i];
  return r;
}
inline Dual operator-(const Dual& a) {
  Dual r = a;
  r.v = -r.v;
  for (double& x : r.d) x = -x;
  return r;
}
inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v, a.d.size());
  for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
inline Dual operator/(const Dual& a, const Dual& b) {
  if (b.v == 0.0) throw EvalError("division by zero");
  Dual r(a.v / b.v, a.d.size());
  for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
  return r;
}

// chain rule for a unary f with given f(v), f'(v)
inline Dual chain(const Dual& a, double fv, double dfv) {
  Dual r(fv, a.d.size());
  for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] = dfv * a.d[i];
  return r;
}

inline Dual2 operator+(const Dual2& a, const Dual2& b) {
  Dual2 r = a;
  r.v += b.v;
  for (std::size_t i = 0; i < r.g.size(); ++i) r.g[i] += b.g[i];
  for (std::size_t i = 0; i < r.h.size(); ++i) r.h[i] += b.h[i];
  return r;
}
inline Dual2 operator-(const Dual2& a, const Dual2& b) {
  Dual2 r = a;
  r.v -= b.v;
  for (std::size_t i = 0; i < r.g.size(); ++i) r.g[i] -= b.g[i];
  for (std::size_t i = 0; i < r.h.size(); ++i) r.h[i] -= b.h[i];
  return r;
}
inline Dual2 operator-(const Dual2& a) {
  Dual2 r = a;
  r.v = -r.v;
  for (double& x : r.g) x = -x;
  for (double& x : r.h) x = -x;
  return r;
}
inline Dual2 operator*(const Dual2& a, const Dual2& b) {
  const std::size_t n = a.g.size();
  Dual2 r(a.v * b.v, n);
  for (std::size_t i = 0; i < n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      r.h[i * n + j] = a.h[i * n + j] * b.v + a.v * b.h[i * n + j] +
                       a.g[i] * b.g[j] + a.g[j] * b.g[i];
  return r;
}
inline Dual2 operator/(const Dual2& a, const Dual2& b) {
  if (b.v == 0.0) throw EvalError("division by zero");
  const std::size_t n = a.g.size();
  Dual2 r(a.v / b.v, n);
  for (std::size_t i = 0; i < n; ++i) r.g[i] = (a.g[i] - r.v * b.g[i]) / b.v;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      r.h[i * n + j] = (a.h[i * n + j] - r.g[i] * b.g[j] - r.g[j] * b.g[i] -
                        r.v * b.h[i * n + j]) / b.v;
  return r;
}

// chain rule with f(v), f'(v), f''(v)
inline Dual2 chain(const Dual2& a, double fv, double dfv, double ddfv) {
  const std::size_t n = a.g.size();
  Dual2 r(fv, n);
  for (std::size_t i = 0; i < n; ++i) r.g[i] = dfv * a.g[i];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      r.h[i * n + j] = dfv * a.h[i * n + j] + ddfv * a.g[i] * a.g[j];
  return r;
}

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Set when an evaluation passes through a kink of abs/sign. Samplers keep
// points off the coordinate hyperplanes, so this fires only for user-chosen
// points.
struct EvalFlags {
  bool nonsmooth = false;
  bool near_singular_branch = false;
};

namespace detail {

constexpr double kKinkEps = 1e-9;

template <class T>
struct EvalCtx {
  std::span<const T> x;
  std::span<const T> u;
  EvalFlags* flags = nullptr;
};

template <class T>
T eval_node(const ExprNode& n, const EvalCtx<T>& ctx);

// grad_component needs one derivative order above its context; the
// implementations below bridge double -> Dual -> Dual2.
inline double eval_grad_component(const ExprNode& n, const EvalCtx<double>& ctx) {
  const std::size_t nx = ctx.x.size();
  std::vector<Dual> xs(nx);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = Dual::seeded(ctx.x[i], nx, i);
  std::vector<Dual> us(ctx.u.size());
  for (std::size_t i = 0; i < ctx.u.size(); ++i) us[i] = Dual(ctx.u[i], nx);
  EvalCtx<Dual> inner{std::span<const Dual>(xs), std::span<const Dual>(us), ctx.flags};
  return eval_node<Dual>(*n.a, inner).d[static_cast<std::size_t>(n.index)];
}

inline Dual eval_grad_component(const ExprNode& n, const EvalCtx<Dual>& ctx) {
  const std::size_t nx = ctx.x.size();
  const std::size_t nd = ctx.x.empty() ? 0 : ctx.x[0].d.size();
  std::vector<Dual2> xs(nx);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = Dual2::seeded(ctx.x[i].v, nx, i);
  std::vector<Dual2> us(ctx.u.size());
  for (std::size_t i = 0; i < ctx.u.size(); ++i) us[i] = Dual2(ctx.u[i].v, nx);
  EvalCtx<Dual2> inner{std::span<const Dual2>(xs), std::span<const Dual2>(us), ctx.flags};
  Dual2 full = eval_node<Dual2>(*n.a, inner);
  const std::size_t k = static_cast<std::size_t>(n.index);
  // d(dV/dx_k) = sum_j H_kj dx_j, propagated through the incoming seeds
  Dual r(full.g[k], nd);
  for (std::size_t j = 0; j < nx; ++j)
    for (std::size_t s = 0; s < nd; ++s) r.d[s] += full.h[k * nx + j] * ctx.x[j].d[s];
  return r;
}

inline Dual2 eval_grad_component(const ExprNode&, const EvalCtx<Dual2>&) {
  throw EvalError("third-order derivatives are not supported");
}

template <class T>
T eval_node(const ExprNode& n, const EvalCtx<T>& ctx) {
  using detail::dconst;
  switch (n.op) {
    case Op::constant: return dconst(n.value, ctx.x.empty() ? dconst(0.0, T{}) : ctx.x[0]);
    case Op::param: return dconst(n.value, ctx.x.empty() ? dconst(0.0, T{}) : ctx.x[0]);
    case Op::var_x: {
      if (n.index >= static_cast<int>(ctx.x.size()))
        throw EvalError("state variable index out of range");
      return ctx.x[static_cast<std::size_t>(n.index)];
    }
    case Op::var_u: {
      if (n.index >= static_cast<int>(ctx.u.size()))
        throw EvalError("input variable index out of range");
      return ctx.u[static_cast<std::size_t>(n.index)];
    }
    case Op::neg: return -eval_node<T>(*n.a, ctx);
    case Op::add: return eval_node<T>(*n.a, ctx) + eval_node<T>(*n.b, ctx);
    case Op::sub: return eval_node<T>(*n.a, ctx) - eval_node<T>(*n.b, ctx);
    case Op::mul: return eval_node<T>(*n.a, ctx) * eval_node<T>(*n.b, ctx);
    case Op::div: return eval_node<T>(*n.a, ctx) / eval_node<T>(*n.b, ctx);
    case Op::exp_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double e = std::exp(value_of(a));
      if constexpr (std::is_same_v<T, double>) return e;
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, e, e);
      else return chain(a, e, e, e);
    }
    case Op::log_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if (v <= 0.0) throw EvalError("log of non-positive value");
      if constexpr (std::is_same_v<T, double>) return std::log(v);
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, std::log(v), 1.0 / v);
      else return chain(a, std::log(v), 1.0 / v, -1.0 / (v * v));
    }
    case Op::sin_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if constexpr (std::is_same_v<T, double>) return std::sin(v);
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, std::sin(v), std::cos(v));
      else return chain(a, std::sin(v), std::cos(v), -std::sin(v));
    }
    case Op::cos_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if constexpr (std::is_same_v<T, double>) return std::cos(v);
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, std::cos(v), -std::sin(v));
      else return chain(a, std::cos(v), -std::sin(v), -std::cos(v));
    }
    case Op::sqrt_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if (v < 0.0) throw EvalError("sqrt of negative value");
      const double s = std::sqrt(v);
      if constexpr (std::is_same_v<T, double>) return s;
      else {
        if (v == 0.0) throw EvalError("derivative of sqrt at zero");
        if constexpr (std::is_same_v<T, Dual>) return chain(a, s, 0.5 / s);
        else return chain(a, s, 0.5 / s, -0.25 / (s * v));
      }
    }
    case Op::abs_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if (ctx.flags && std::abs(v) <= kKinkEps) ctx.flags->nonsmooth = true;
      const double s = sign_of(v);
      if constexpr (std::is_same_v<T, double>) return std::abs(v);
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, std::abs(v), s);
      else return chain(a, std::abs(v), s, 0.0);
    }
    case Op::sign_fn: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      if (ctx.flags && std::abs(v) <= kKinkEps) ctx.flags->nonsmooth = true;
      if constexpr (std::is_same_v<T, double>) return sign_of(v);
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, sign_of(v), 0.0);
      else return chain(a, sign_of(v), 0.0, 0.0);
    }
    case Op::pow: {
      T a = eval_node<T>(*n.a, ctx);
      const double v = value_of(a);
      const double p = n.value;
      if (n.int_exponent) {
        const long long k = static_cast<long long>(p);
        if (k < 0 && v == 0.0) throw EvalError("zero raised to a negative power");
        auto powi = [](double base, long long e) {
          double r = 1.0;
          long long m = e < 0 ? -e : e;
          double b = base;
          while (m > 0) {
            if (m & 1) r *= b;
            b *= b;
            m >>= 1;
          }
          return e < 0 ? 1.0 / r : r;
        };
        const double fv = powi(v, k);
        if constexpr (std::is_same_v<T, double>) return fv;
        else {
          const double d1 = k == 0 ? 0.0 : static_cast<double>(k) * powi(v, k - 1);
          if constexpr (std::is_same_v<T, Dual>) return chain(a, fv, d1);
          else {
            const double d2 = (k == 0 || k == 1)
                                  ? 0.0
                                  : static_cast<double>(k) * static_cast<double>(k - 1) * powi(v, k - 2);
            return chain(a, fv, d1, d2);
          }
        }
      }
      if (v <= 0.0) throw EvalError("fractional power requires a positive base");
      const double fv = std::pow(v, p);
      if constexpr (std::is_same_v<T, double>) return fv;
      else if constexpr (std::is_same_v<T, Dual>) return chain(a, fv, p * std::pow(v, p - 1.0));
      else return chain(a, fv, p * std::pow(v, p - 1.0), p * (p - 1.0) * std::pow(v, p - 2.0));
    }
    case Op::grad_component: return eval_grad_component(n, ctx);
  }
  throw EvalError("unhandled expression node");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluation entry points.

inline double eval(const Expr& e, std::span<const double> x,
                   std::span<const double> u = {}, EvalFlags* flags = nullptr) {
  detail::EvalCtx<double> ctx{x, u, flags};
  const double v = detail::eval_node<double>(*e, ctx);
  if (!std::isfinite(v)) throw EvalError("evaluation produced a non-finite value");
  return v;
}

struct GradResult {
  double value = 0.0;
  Vec gradient;
};

/// Value and gradient w.r.t. the state variables, forward-mode duals.
inline GradResult eval_grad(const Expr& e, std::span<const double> x,
                            std::span<const double> u = {}, EvalFlags* flags = nullptr) {
  const std::size_t n = x.size();
  std::vector<Dual> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = Dual::seeded(x[i], n, i);
  std::vector<Dual> us(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) us[i] = Dual(u[i], n);
  detail::EvalCtx<Dual> ctx{std::span<const Dual>(xs), std::span<const Dual>(us), flags};
  Dual r = detail::eval_node<Dual>(*e, ctx);
  if (!std::isfinite(r.v)) throw EvalError("evaluation produced a non-finite value");
  for (double d : r.d)
    if (!std::isfinite(d)) throw EvalError("gradient is not finite");
  return GradResult{r.v, std::move(r.d)};
}

struct HessResult {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// Value, gradient and Hessian from a single second-order dual sweep.
inline HessResult eval_hess(const Expr& e, std::span<const double> x,
                            std::span<const double> u = {}, EvalFlags* flags = nullptr) {
  const std::size_t n = x.size();
  std::vector<Dual2> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = Dual2::seeded(x[i], n, i);
  std::vector<Dual2> us(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) us[i] = Dual2(u[i], n);
  detail::EvalCtx<Dual2> ctx{std::span<const Dual2>(xs), std::span<const Dual2>(us), flags};
  Dual2 r = detail::eval_node<Dual2>(*e, ctx);
  HessResult out;
  out.value = r.v;
  out.gradient = std::move(r.g);
  out.hessian = Mat(static_cast<int>(n), static_cast<int>(n));
  out.hessian.a = std::move(r.h);
  return out;
}

// ---------------------------------------------------------------------------
// Parser. Recursive descent, precedence ^ > unary minus > */ > +-, binary
// operators left-associative. The exponent of ^ must fold to a constant.

struct Dims {
  int n = 0;
  int m = 0;
};

namespace detail {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  Dims dims;
  const std::map<std::string, double>* params;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) { ++pos; return true; }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos); }

  Expr parse() {
    skip_ws();
    if (pos >= text.size()) fail("empty expression");
    Expr e = expr();
    skip_ws();
    if (pos < text.size()) fail("unexpected trailing input");
    return e;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (eat('+')) lhs = make_binary(Op::add, lhs, term());
      else if (eat('-')) lhs = make_binary(Op::sub, lhs, term());
      else return lhs;
    }
  }

  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (eat('*')) lhs = make_binary(Op::mul, lhs, factor());
      else if (eat('/')) lhs = make_binary(Op::div, lhs, factor());
      else return lhs;
    }
  }

  Expr factor() {
    if (eat('-')) return make_unary(Op::neg, factor());
    return power();
  }

  Expr power() {
    Expr base = primary();
    while (eat('^')) {
      const std::size_t at = pos;
      bool negated = eat('-');
      Expr e = primary();
      std::optional<double> c = fold_constant(e);
      if (!c) throw ParseError("exponent must be a constant", at);
      base = make_pow(base, negated ? -*c : *c);
    }
    return base;
  }

  static std::optional<double> fold_constant(const Expr& e) {
    switch (e->op) {
      case Op::constant:
      case Op::param: return e->value;
      case Op::neg: {
        auto v = fold_constant(e->a);
        return v ? std::optional<double>(-*v) : std::nullopt;
      }
      case Op::add: case Op::sub: case Op::mul: case Op::div: {
        auto l = fold_constant(e->a), r = fold_constant(e->b);
        if (!l || !r) return std::nullopt;
        switch (e->op) {
          case Op::add: return *l + *r;
          case Op::sub: return *l - *r;
          case Op::mul: return *l * *r;
          default: return *l / *r;
        }
      }
      case Op::pow: {
        auto b = fold_constant(e->a);
        return b ? std::optional<double>(std::pow(*b, e->value)) : std::nullopt;
      }
      default: return std::nullopt;
    }
  }

  Expr primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    const char c = text[pos];
    if (c == '(') {
      ++pos;
      Expr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr number() {
    const char* begin = text.data() + pos;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos += static_cast<std::size_t>(end - begin);
    return make_const(v);
  }

  Expr identifier() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name(text.substr(start, pos - start));
    if (peek() == '(') {
      Op op;
      int grad_index = -1;
      if (name == "exp") op = Op::exp_fn;
      else if (name == "log") op = Op::log_fn;
      else if (name == "sin") op = Op::sin_fn;
      else if (name == "cos") op = Op::cos_fn;
      else if (name == "sqrt") op = Op::sqrt_fn;
      else if (name == "abs") op = Op::abs_fn;
      else if (name == "sign") op = Op::sign_fn;
      else if (auto gi = grad_name_index(name)) { op = Op::grad_component; grad_index = *gi; }
      else throw ParseError("unknown function '" + name + "'", start);
      eat('(');
      Expr arg = expr();
      if (!eat(')')) fail("expected ')' after function argument");
      if (op == Op::grad_component) return make_grad_component(arg, grad_index);
      return make_unary(op, arg);
    }
    if (auto idx = var_index(name, 'x')) {
      if (*idx >= dims.n) throw ParseError("state variable '" + name + "' exceeds dimension", start);
      return make_var(*idx);
    }
    if (auto idx = var_index(name, 'u')) {
      if (*idx >= dims.m) throw ParseError("input variable '" + name + "' exceeds input dimension", start);
      return make_input(*idx);
    }
    if (params) {
      auto it = params->find(name);
      if (it != params->end()) return make_param(name, it->second);
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  // x1..xn / u1..um, 1-based in the surface syntax
  static std::optional<int> var_index(const std::string& name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return std::nullopt;
    int idx = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
      idx = idx * 10 + (name[i] - '0');
    }
    if (idx < 1) return std::nullopt;
    return idx - 1;
  }

  // grad1..gradN: partial derivative of the argument w.r.t. x_i. Produced
  // by the library when it writes gradient fields; accepted on input so
  // those systems round-trip through files.
  static std::optional<int> grad_name_index(const std::string& name) {
    if (name.size() < 5 || name.compare(0, 4, "grad") != 0) return std::nullopt;
    int idx = 0;
    for (std::size_t i = 4; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
      idx = idx * 10 + (name[i] - '0');
    }
    if (idx < 1) return std::nullopt;
    return idx - 1;
  }
};

}  // namespace detail

inline Expr parse_expression(std::string_view text, Dims dims,
                             const std::map<std::string, double>& params = {}) {
  if (text.empty()) throw ParseError("empty expression", 0);
  detail::Parser p{text, 0, dims, &params};
  return p.parse();
}

// ---------------------------------------------------------------------------
// Printer. Emits a form that re-parses to a structurally identical tree.

namespace detail {

inline int precedence(Op op) {
  switch (op) {
    case Op::add: case Op::sub: return 1;
    case Op::mul: case Op::div: return 2;
    case Op::neg: return 3;
    case Op::pow: return 4;
    default: return 5;
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void print_node(const ExprNode& n, std::string& out);

inline void print_child(const Expr& child, int min_prec, std::string& out) {
  if (precedence(child->op) < min_prec) {
    out += '(';
    print_node(*child, out);
    out += ')';
  } else {
    print_node(*child, out);
  }
}

inline void print_node(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case Op::constant: out += format_double(n.value); return;
    case Op::param: out += n.name; return;
    case Op::var_x: out += "x" + std::to_string(n.index + 1); return;
    case Op::var_u: out += "u" + std::to_string(n.index + 1); return;
    case Op::neg:
      out += '-';
      print_child(n.a, precedence(Op::neg) + 1, out);
      return;
    case Op::add:
      print_child(n.a, 1, out);
      out += '+';
      print_child(n.b, 2, out);
      return;
    case Op::sub:
      print_child(n.a, 1, out);
      out += '-';
      print_child(n.b, 2, out);
      return;
    case Op::mul:
      print_child(n.a, 2, out);
      out += '*';
      print_child(n.b, 3, out);
      return;
    case Op::div:
      print_child(n.a, 2, out);
      out += '/';
      print_child(n.b, 3, out);
      return;
    case Op::pow:
      print_child(n.a, 5, out);
      out += '^';
      if (n.value < 0.0) {
        out += '(';
        out += format_double(n.value);
        out += ')';
      } else {
        out += format_double(n.value);
      }
      return;
    case Op::exp_fn: out += "exp("; print_node(*n.a, out); out += ')'; return;
    case Op::log_fn: out += "log("; print_node(*n.a, out); out += ')'; return;
    case Op::sin_fn: out += "sin("; print_node(*n.a, out); out += ')'; return;
    case Op::cos_fn: out += "cos("; print_node(*n.a, out); out += ')'; return;
    case Op::sqrt_fn: out += "sqrt("; print_node(*n.a, out); out += ')'; return;
    case Op::abs_fn: out += "abs("; print_node(*n.a, out); out += ')'; return;
    case Op::sign_fn: out += "sign("; print_node(*n.a, out); out += ')'; return;
    case Op::grad_component:
      out += "grad" + std::to_string(n.index + 1) + "(";
      print_node(*n.a, out);
      out += ')';
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_node(*e, out);
  return out;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a->op != b->op || a->index != b->index || a->name != b->name) return false;
  if (a->op == Op::constant || a->op == Op::param || a->op == Op::pow) {
    if (!(a->value == b->value || (std::isnan(a->value) && std::isnan(b->value)))) return false;
  }
  if (static_cast<bool>(a->a) != static_cast<bool>(b->a)) return false;
  if (static_cast<bool>(a->b) != static_cast<bool>(b->b)) return false;
  if (a->a && !structurally_equal(a->a, b->a)) return false;
  if (a->b && !structurally_equal(a->b, b->b)) return false;
  return true;
}

inline bool contains_op(const Expr& e, Op op) {
  if (e->op == op) return true;
  if (e->a && contains_op(e->a, op)) return true;
  if (e->b && contains_op(e->b, op)) return true;
  return false;
}

}  // namespace lyap
