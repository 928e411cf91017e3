#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "selfnorm/error.hpp"

namespace selfnorm {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Values are immutable in spirit: every
// operation below returns a fresh object, so instances can be shared across
// threads once built.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {
    if (rows == 0 || cols == 0) {
      throw DimensionMismatch("matrix dimensions must be at least 1x1");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  const double* row_data(std::size_t i) const { return data_.data() + i * cols_; }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (x.size() != a.cols()) throw DimensionMismatch("matvec: size mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_data(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

// y = a^T x without forming the transpose.
inline Vector matvec_transposed(const Matrix& a, const Vector& x) {
  if (x.size() != a.rows()) throw DimensionMismatch("matvec_transposed: size mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_data(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * x[i];
  }
  return y;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: size mismatch");
  Matrix c(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double x : m.data()) r = std::max(r, std::abs(x));
  return r;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("max_abs_diff: shape mismatch");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    r = std::max(r, std::abs(a.data()[i] - b.data()[i]));
  }
  return r;
}

inline Vector scaled(const Vector& v, double c) {
  Vector r(v);
  for (double& x : r) x *= c;
  return r;
}

inline Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("add: size mismatch");
  Vector r(a);
  for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
  return r;
}

inline Vector subtract(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("subtract: size mismatch");
  Vector r(a);
  for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
  return r;
}

}  // namespace selfnorm
