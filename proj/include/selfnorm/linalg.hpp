#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "selfnorm/matrix.hpp"

namespace selfnorm {

// Lower-triangular factor L with L L^T = M + jitter * I.
struct SpdFactor {
  Matrix lower;
  double jitter = 0.0;
};

namespace detail {

inline bool try_cholesky(const Matrix& m, double eps, Matrix& lower) {
  const std::size_t n = m.rows();
  lower = Matrix(n, n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j) + eps;
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > 0.0)) return false;
    lower(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / lower(j, j);
    }
  }
  return true;
}

}  // namespace detail

// Cholesky with a jitter ladder 0, 1e-12, 1e-11, ..., 1e-6. Plug-in
// correlation matrices are PSD in exact arithmetic but rounding can leave
// tiny negative eigenvalues; the ladder caps the distortion at 1e-6.
inline SpdFactor cholesky_jittered(const Matrix& m) {
  if (m.rows() != m.cols()) throw NotSymmetric("cholesky: matrix is not square");
  const double scale = max_abs(m);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10 * std::max(scale, 1e-300)) {
        throw NotSymmetric("cholesky: matrix is not symmetric");
      }
    }
  }
  SpdFactor factor;
  if (detail::try_cholesky(m, 0.0, factor.lower)) {
    factor.jitter = 0.0;
    return factor;
  }
  for (double eps = 1e-12; eps <= 1.0000001e-6; eps *= 10.0) {
    if (detail::try_cholesky(m, eps, factor.lower)) {
      factor.jitter = eps;
      return factor;
    }
  }
  throw NotFactorable("cholesky: jitter ladder exhausted at 1e-6");
}

inline Vector solve_spd(const SpdFactor& f, const Vector& b) {
  const std::size_t n = f.lower.rows();
  if (b.size() != n) throw DimensionMismatch("solve_spd: size mismatch");
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= f.lower(i, k) * y[k];
    y[i] = s / f.lower(i, i);
  }
  Vector x(n, 0.0);
  for (std::size_t ii = n; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= f.lower(k, i) * x[k];
    x[i] = s / f.lower(i, i);
  }
  return x;
}

// Column-wise solve, (M + jitter I)^{-1} B.
inline Matrix solve_spd(const SpdFactor& f, const Matrix& b) {
  if (b.rows() != f.lower.rows()) throw DimensionMismatch("solve_spd: shape mismatch");
  Matrix x(b.rows(), b.cols(), 0.0);
  Vector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    Vector sol = solve_spd(f, col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

// Householder QR without pivoting. Shared by the least-squares fit and the
// rotation solves; callers inspect diag_ratio() against their own
// singularity thresholds.
class QrDecomposition {
 public:
  explicit QrDecomposition(const Matrix& a) : qr_(a), tau_(a.cols(), 0.0) {
    if (a.rows() < a.cols()) {
      throw DimensionMismatch("qr: more columns than rows");
    }
    const std::size_t n = qr_.rows();
    const std::size_t p = qr_.cols();
    for (std::size_t k = 0; k < p; ++k) {
      double norm = 0.0;
      for (std::size_t i = k; i < n; ++i) norm = std::hypot(norm, qr_(i, k));
      if (norm == 0.0) {
        tau_[k] = 0.0;
        continue;
      }
      double alpha = qr_(k, k) >= 0.0 ? -norm : norm;
      // Householder vector v, normalized so v[k] = 1, stored below diagonal.
      const double vkk = qr_(k, k) - alpha;
      for (std::size_t i = k + 1; i < n; ++i) qr_(i, k) /= vkk;
      tau_[k] = -vkk / alpha;
      qr_(k, k) = alpha;
      for (std::size_t j = k + 1; j < p; ++j) {
        double s = qr_(k, j);
        for (std::size_t i = k + 1; i < n; ++i) s += qr_(i, k) * qr_(i, j);
        s *= tau_[k];
        qr_(k, j) -= s;
        for (std::size_t i = k + 1; i < n; ++i) qr_(i, j) -= qr_(i, k) * s;
      }
    }
  }

  std::size_t rows() const { return qr_.rows(); }
  std::size_t cols() const { return qr_.cols(); }

  // min |R_jj| / max |R_jj|; zero if any diagonal vanishes.
  double diag_ratio() const {
    double lo = std::abs(qr_(0, 0));
    double hi = lo;
    for (std::size_t j = 1; j < qr_.cols(); ++j) {
      const double d = std::abs(qr_(j, j));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    if (hi == 0.0) return 0.0;
    return lo / hi;
  }

  // Least-squares solution of A x = b (exact solve when A is square).
  Vector solve(const Vector& b) const {
    const std::size_t n = qr_.rows();
    const std::size_t p = qr_.cols();
    if (b.size() != n) throw DimensionMismatch("qr solve: size mismatch");
    Vector w(b);
    for (std::size_t k = 0; k < p; ++k) {
      if (tau_[k] == 0.0) continue;
      double s = w[k];
      for (std::size_t i = k + 1; i < n; ++i) s += qr_(i, k) * w[i];
      s *= tau_[k];
      w[k] -= s;
      for (std::size_t i = k + 1; i < n; ++i) w[i] -= qr_(i, k) * s;
    }
    Vector x(p, 0.0);
    for (std::size_t jj = p; jj > 0; --jj) {
      const std::size_t j = jj - 1;
      double s = w[j];
      for (std::size_t k = j + 1; k < p; ++k) s -= qr_(j, k) * x[k];
      x[j] = s / qr_(j, j);
    }
    return x;
  }

 private:
  Matrix qr_;
  Vector tau_;
};

// Least-squares fit via Householder QR. The Gram-pivot precondition
// (smallest pivot > 1e-12 * largest) is equivalent to an R-diagonal ratio of
// 1e-6, since Gram pivots are the squared R diagonal.
inline Vector least_squares(const Matrix& x, const Vector& y) {
  if (y.size() != x.rows()) throw DimensionMismatch("least_squares: size mismatch");
  if (x.rows() < x.cols()) throw SingularDesign("least_squares: fewer rows than columns");
  QrDecomposition qr(x);
  if (qr.diag_ratio() <= 1e-6) {
    throw SingularDesign("least_squares: design matrix numerically singular");
  }
  return qr.solve(y);
}

}  // namespace selfnorm
