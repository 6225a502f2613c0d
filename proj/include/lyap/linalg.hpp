#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace lyap {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vec axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = alpha * x[i] + y[i];
  return r;
}

inline Vec scaled(double alpha, std::span<const double> x) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = alpha * x[i];
  return r;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

// Row-major dense matrix. Small systems only; operations assert size
// compatibility but do no other validation.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  Mat transposed() const {
    Mat t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius() const {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
};

inline Mat operator*(const Mat& lhs, const Mat& rhs) {
  if (lhs.cols != rhs.rows) throw std::invalid_argument("Mat multiply: size mismatch");
  Mat r(lhs.rows, rhs.cols);
  for (int i = 0; i < lhs.rows; ++i)
    for (int k = 0; k < lhs.cols; ++k) {
      const double v = lhs(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < rhs.cols; ++j) r(i, j) += v * rhs(k, j);
    }
  return r;
}

inline Mat operator+(const Mat& lhs, const Mat& rhs) {
  Mat r = lhs;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += rhs.a[i];
  return r;
}

inline Mat operator-(const Mat& lhs, const Mat& rhs) {
  Mat r = lhs;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= rhs.a[i];
  return r;
}

inline Mat scaled(double alpha, const Mat& m) {
  Mat r = m;
  for (double& v : r.a) v *= alpha;
  return r;
}

inline Vec matvec(const Mat& m, std::span<const double> x) {
  Vec r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) r[i] += m(i, j) * x[j];
  return r;
}

// LU with partial pivoting, templated so the same code serves real and
// complex systems (eigenvector residuals, Hautus rank checks).
template <class T>
struct Lu {
  int n = 0;
  std::vector<T> lu;       // packed L\U, row-major
  std::vector<int> perm;   // row permutation
  bool singular = false;

  T& at(int i, int j) { return lu[static_cast<std::size_t>(i) * n + j]; }
  T at(int i, int j) const { return lu[static_cast<std::size_t>(i) * n + j]; }
};

template <class T>
Lu<T> lu_factor(std::vector<T> a, int n) {
  Lu<T> f;
  f.n = n;
  f.lu = std::move(a);
  f.perm.resize(n);
  for (int i = 0; i < n; ++i) f.perm[i] = i;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(f.at(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double m = std::abs(f.at(i, k));
      if (m > best) { best = m; piv = i; }
    }
    if (best == 0.0) { f.singular = true; continue; }
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(f.at(k, j), f.at(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      const T m = f.at(i, k) / f.at(k, k);
      f.at(i, k) = m;
      for (int j = k + 1; j < n; ++j) f.at(i, j) -= m * f.at(k, j);
    }
  }
  return f;
}

template <class T>
std::vector<T> lu_solve(const Lu<T>& f, std::span<const T> b) {
  if (f.singular) throw std::runtime_error("lu_solve: singular matrix");
  const int n = f.n;
  std::vector<T> x(n);
  for (int i = 0; i < n; ++i) x[i] = b[f.perm[i]];
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) x[i] -= f.at(i, j) * x[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= f.at(i, j) * x[j];
    x[i] /= f.at(i, i);
  }
  return x;
}

inline Vec solve_linear(const Mat& m, std::span<const double> b) {
  if (m.rows != m.cols) throw std::invalid_argument("solve_linear: square matrix required");
  auto f = lu_factor<double>(m.a, m.rows);
  std::vector<double> rhs(b.begin(), b.end());
  return lu_solve<double>(f, rhs);
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
// Returns values in ascending order. Input symmetry is assumed.
inline Vec symmetric_eigenvalues(Mat m) {
  const int n = m.rows;
  if (n != m.cols) throw std::invalid_argument("symmetric_eigenvalues: square matrix required");
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    if (off < 1e-300) break;
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(m(i, i)));
    if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300)) break;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  Vec ev(n);
  for (int i = 0; i < n; ++i) ev[i] = m(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

// Singular values (descending) via the symmetric eigenproblem of A^T A.
inline Vec singular_values(const Mat& m) {
  const Mat g = m.transposed() * m;
  Vec ev = symmetric_eigenvalues(g);
  Vec sv(ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i)
    sv[ev.size() - 1 - i] = std::sqrt(std::max(0.0, ev[i]));
  return sv;
}

// 2-norm condition number estimate, infinite when numerically singular.
inline double condition_number(const Mat& m) {
  Vec sv = singular_values(m);
  const double smax = sv.front();
  const double smin = sv.back();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

}  // namespace lyap
