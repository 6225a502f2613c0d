#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "lyap/linalg.hpp"

namespace lyap {

using Complex = std::complex<double>;
using DenseMatrix = Mat;

inline constexpr int kMaxDim = 32;

inline void require_small_square(const Mat& a, const char* who) {
  if (a.rows != a.cols) throw std::invalid_argument(std::string(who) + ": square matrix required");
  if (a.rows > kMaxDim) throw std::invalid_argument(std::string(who) + ": dimension cap is 32");
}

namespace detail {

// Householder reduction to upper Hessenberg form, in place.
inline void hessenberg_reduce(Mat& h) {
  const int n = h.rows;
  for (int k = 0; k < n - 2; ++k) {
    double scale = 0.0;
    for (int i = k + 1; i < n; ++i) scale += std::abs(h(i, k));
    if (scale == 0.0) continue;
    Vec v(static_cast<std::size_t>(n), 0.0);
    double sigma = 0.0;
    for (int i = k + 1; i < n; ++i) {
      v[i] = h(i, k) / scale;
      sigma += v[i] * v[i];
    }
    double alpha = std::sqrt(sigma);
    if (v[k + 1] > 0.0) alpha = -alpha;
    v[k + 1] -= alpha;
    const double beta = -alpha * v[k + 1];
    if (beta == 0.0) continue;
    // H <- P H P with P = I - v v^T / beta
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = k + 1; i < n; ++i) s += v[i] * h(i, j);
      s /= beta;
      for (int i = k + 1; i < n; ++i) h(i, j) -= s * v[i];
    }
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = k + 1; j < n; ++j) s += h(i, j) * v[j];
      s /= beta;
      for (int j = k + 1; j < n; ++j) h(i, j) -= s * v[j];
    }
    h(k + 1, k) = alpha * scale;
    for (int i = k + 2; i < n; ++i) h(i, k) = 0.0;
  }
}

struct Givens {
  Complex c, s;   // [[conj(c), conj(s)], [-s, c]] maps (a,b) to (r,0)
};

inline Givens make_givens(Complex a, Complex b) {
  const double r = std::hypot(std::abs(a), std::abs(b));
  if (r == 0.0) return {1.0, 0.0};
  return {a / r, b / r};
}

inline Complex wilkinson_shift(Complex a, Complex b, Complex c, Complex d) {
  const Complex tr2 = 0.5 * (a + d);
  const Complex disc = std::sqrt(tr2 * tr2 - (a * d - b * c));
  const Complex l1 = tr2 + disc, l2 = tr2 - disc;
  return std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
}

}  // namespace detail

/// All eigenvalues with multiplicity: Hessenberg reduction followed by
/// shifted QR iteration on the Hessenberg matrix (Givens form, Wilkinson
/// shifts, occasional exceptional shift). Deflation at 1e-12 relative
/// subdiagonal, at most 100*n sweeps.
inline std::vector<Complex> eigenvalues(const Mat& a) {
  require_small_square(a, "eigenvalues");
  const int n = a.rows;
  if (n == 0) return {};
  if (n == 1) return {Complex(a(0, 0), 0.0)};

  Mat hreal = a;
  detail::hessenberg_reduce(hreal);
  std::vector<Complex> h(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h[static_cast<std::size_t>(i) * n + j] = hreal(i, j);
  auto H = [&](int i, int j) -> Complex& { return h[static_cast<std::size_t>(i) * n + j]; };

  double anorm = 0.0;
  for (const Complex& v : h) anorm = std::max(anorm, std::abs(v));
  if (anorm == 0.0) return std::vector<Complex>(static_cast<std::size_t>(n), Complex(0.0));

  std::vector<Complex> lambdas;
  lambdas.reserve(static_cast<std::size_t>(n));
  const int max_sweeps = 100 * n;
  int sweeps = 0;
  int hi = n - 1;
  int stuck = 0;

  while (hi >= 0) {
    // deflate small subdiagonals
    for (int k = 0; k < hi; ++k) {
      double denom = std::abs(H(k, k)) + std::abs(H(k + 1, k + 1));
      if (denom == 0.0) denom = anorm;
      if (std::abs(H(k + 1, k)) <= 1e-12 * denom) H(k + 1, k) = 0.0;
    }
    if (hi == 0 || H(hi, hi - 1) == Complex(0.0)) {
      lambdas.push_back(H(hi, hi));
      --hi;
      stuck = 0;
      continue;
    }
    int lo = hi;
    while (lo > 0 && H(lo, lo - 1) != Complex(0.0)) --lo;

    if (++sweeps > max_sweeps)
      throw std::runtime_error("eigenvalues: QR iteration did not converge after " +
                               std::to_string(sweeps - 1) + " sweeps");
    Complex mu;
    if (++stuck % 16 == 0) {
      mu = Complex(std::abs(H(hi, hi - 1)) + 0.75 * std::abs(H(hi, hi)), 0.0);
    } else {
      mu = detail::wilkinson_shift(H(hi - 1, hi - 1), H(hi - 1, hi), H(hi, hi - 1), H(hi, hi));
    }

    for (int k = lo; k <= hi; ++k) H(k, k) -= mu;
    std::vector<detail::Givens> rots(static_cast<std::size_t>(hi - lo));
    for (int k = lo; k < hi; ++k) {
      const auto g = detail::make_givens(H(k, k), H(k + 1, k));
      rots[static_cast<std::size_t>(k - lo)] = g;
      for (int j = k; j <= hi; ++j) {
        const Complex t1 = H(k, j), t2 = H(k + 1, j);
        H(k, j) = std::conj(g.c) * t1 + std::conj(g.s) * t2;
        H(k + 1, j) = -g.s * t1 + g.c * t2;
      }
    }
    for (int k = lo; k < hi; ++k) {
      const auto g = rots[static_cast<std::size_t>(k - lo)];
      for (int i = lo; i <= std::min(hi, k + 1); ++i) {
        const Complex t1 = H(i, k), t2 = H(i, k + 1);
        H(i, k) = t1 * g.c + t2 * g.s;
        H(i, k + 1) = -t1 * std::conj(g.s) + t2 * std::conj(g.c);
      }
    }
    for (int k = lo; k <= hi; ++k) H(k, k) += mu;
  }
  return lambdas;
}

/// ||A v - lambda v|| / ||v|| for an eigenvector recovered by inverse
/// iteration; exposes the quality of each extracted eigenvalue.
inline Vec eigenvalue_residuals(const Mat& a, const std::vector<Complex>& lambdas) {
  const int n = a.rows;
  double anorm = 0.0;
  for (double v : a.a) anorm = std::max(anorm, std::abs(v));
  Vec residuals(lambdas.size());
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    Complex lam = lambdas[li];
    std::vector<Complex> m(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m[static_cast<std::size_t>(i) * n + j] = Complex(a(i, j)) - (i == j ? lam : Complex(0.0));
    // tiny diagonal perturbation keeps the factorization nonsingular
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] += Complex(1e-13 * (anorm + 1.0));
    auto f = lu_factor<Complex>(m, n);
    std::vector<Complex> v(static_cast<std::size_t>(n), Complex(1.0));
    for (int it = 0; it < 2 && !f.singular; ++it) {
      v = lu_solve<Complex>(f, v);
      double nv = 0.0;
      for (const Complex& c : v) nv += std::norm(c);
      nv = std::sqrt(nv);
      for (Complex& c : v) c /= nv;
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      Complex ri = -lam * v[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) ri += Complex(a(i, j)) * v[static_cast<std::size_t>(j)];
      num += std::norm(ri);
      den += std::norm(v[static_cast<std::size_t>(i)]);
    }
    residuals[li] = std::sqrt(num / den);
  }
  return residuals;
}

namespace detail {

// Singular values of a complex matrix through the Hermitian Gram matrix,
// embedded as a real symmetric matrix of twice the size (eigenvalues come
// out doubled).
inline Vec complex_singular_values(const std::vector<Complex>& m, int rows, int cols) {
  std::vector<Complex> gram(static_cast<std::size_t>(rows) * rows, Complex(0.0));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) {
      Complex s = 0.0;
      for (int k = 0; k < cols; ++k)
        s += m[static_cast<std::size_t>(i) * cols + k] *
             std::conj(m[static_cast<std::size_t>(j) * cols + k]);
      gram[static_cast<std::size_t>(i) * rows + j] = s;
    }
  Mat emb(2 * rows, 2 * rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) {
      const Complex g = gram[static_cast<std::size_t>(i) * rows + j];
      emb(i, j) = g.real();
      emb(i + rows, j + rows) = g.real();
      emb(i, j + rows) = -g.imag();
      emb(i + rows, j) = g.imag();
    }
  Vec ev = symmetric_eigenvalues(emb);
  Vec sv;
  sv.reserve(static_cast<std::size_t>(rows));
  // ascending eigenvalues, each doubled; take every second from the top
  for (int i = 0; i < rows; ++i)
    sv.push_back(std::sqrt(std::max(0.0, ev[static_cast<std::size_t>(2 * rows - 1 - 2 * i)])));
  return sv;
}

}  // namespace detail

struct HautusResult {
  bool stabilizable = true;
  std::vector<Complex> failing;       // eigenvalues where rank([A - lambda I | B]) < n
  std::vector<Complex> tested;        // eigenvalues with Re >= -1e-10
};

/// PBH stabilizability test: rank([A - lambda I | B]) = n for every
/// eigenvalue in the closed right half-plane (margin -1e-10 so marginal
/// eigenvalues are included). Rank by singular values at 1e-9 * sigma_max.
inline HautusResult hautus_test(const Mat& a, const Mat& b) {
  require_small_square(a, "hautus_test");
  if (b.rows != a.rows) throw std::invalid_argument("hautus_test: B row count must match A");
  const int n = a.rows, m = b.cols;
  HautusResult out;
  for (const Complex lam : eigenvalues(a)) {
    if (lam.real() < -1e-10) continue;
    out.tested.push_back(lam);
    std::vector<Complex> pencil(static_cast<std::size_t>(n) * (n + m));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        pencil[static_cast<std::size_t>(i) * (n + m) + j] =
            Complex(a(i, j)) - (i == j ? lam : Complex(0.0));
      for (int j = 0; j < m; ++j)
        pencil[static_cast<std::size_t>(i) * (n + m) + n + j] = Complex(b(i, j));
    }
    Vec sv = detail::complex_singular_values(pencil, n, n + m);
    const double smax = sv.empty() ? 0.0 : sv.front();
    int rank = 0;
    for (double s : sv)
      if (s > 1e-9 * smax) ++rank;
    if (rank < n) {
      out.stabilizable = false;
      out.failing.push_back(lam);
    }
  }
  return out;
}

/// Solve A^T P + P A = -Q for symmetric positive definite P via the dense
/// Kronecker-sum linear system. A must be Hurwitz and Q symmetric positive
/// definite; the residual is verified before returning.
inline Mat solve_lyapunov_eq(const Mat& a, const Mat& q) {
  require_small_square(a, "solve_lyapunov_eq");
  if (q.rows != a.rows || q.cols != a.cols)
    throw std::invalid_argument("solve_lyapunov_eq: Q must match A in size");
  const int n = a.rows;

  std::string offenders;
  for (const Complex lam : eigenvalues(a))
    if (lam.real() >= 0.0)
      offenders += (offenders.empty() ? "" : ", ") + std::to_string(lam.real()) +
                   (lam.imag() >= 0 ? "+" : "") + std::to_string(lam.imag()) + "i";
  if (!offenders.empty())
    throw std::invalid_argument("solve_lyapunov_eq: A is not Hurwitz (eigenvalues " + offenders + ")");

  double qmax = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) qmax = std::max(qmax, std::abs(q(i, j)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(q(i, j) - q(j, i)) > 1e-10 * std::max(1.0, qmax))
        throw std::invalid_argument("solve_lyapunov_eq: Q must be symmetric");
  {
    Vec qe = symmetric_eigenvalues(q);
    if (qe.front() <= 0.0)
      throw std::invalid_argument("solve_lyapunov_eq: Q must be positive definite");
  }

  // vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P)
  const int nn = n * n;
  Mat k(nn, nn);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p) {
        k(i * n + j, i * n + p) += a(p, j);   // P A contribution
        k(i * n + j, p * n + j) += a(p, i);   // A^T P contribution
      }
  Vec rhs(static_cast<std::size_t>(nn));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rhs[static_cast<std::size_t>(i) * n + j] = -q(i, j);
  Vec pvec = solve_linear(k, rhs);

  Mat p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = pvec[static_cast<std::size_t>(i) * n + j];
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double sym = 0.5 * (p(i, j) + p(j, i));
      p(i, j) = sym;
      p(j, i) = sym;
    }

  const Mat residual = a.transposed() * p + p * a + q;
  if (residual.frobenius() > 1e-8 * std::max(q.frobenius(), 1e-300))
    throw std::runtime_error("solve_lyapunov_eq: residual check failed");
  if (symmetric_eigenvalues(p).front() <= 0.0)
    throw std::runtime_error("solve_lyapunov_eq: P is not positive definite");
  return p;
}

struct BlendResult {
  Mat blend;
  double max_real_part = 0.0;
};

/// s A1 + (1-s) A2 and the spectral abscissa of the blend.
inline BlendResult hurwitz_blend(const Mat& a1, const Mat& a2, double s) {
  if (a1.rows != a2.rows || a1.cols != a2.cols)
    throw std::invalid_argument("hurwitz_blend: dimensions differ");
  BlendResult r{scaled(s, a1) + scaled(1.0 - s, a2), -std::numeric_limits<double>::infinity()};
  for (const Complex lam : eigenvalues(r.blend))
    r.max_real_part = std::max(r.max_real_part, lam.real());
  return r;
}

}  // namespace lyap
