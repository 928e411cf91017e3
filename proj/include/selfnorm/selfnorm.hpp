#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "selfnorm/estimating.hpp"
#include "selfnorm/linalg.hpp"
#include "selfnorm/matrix.hpp"

namespace selfnorm {

// Max over coordinates of |sum psi_ij| / sqrt(sum psi_ij^2).
struct SelfNormStat {
  double value = 0.0;
  Vector per_coordinate;
  std::size_t argmax = 0;
};

// Symmetric, unit-diagonal plug-in correlation matrix. Symmetry and the unit
// diagonal are enforced on construction so downstream factorizations never
// see rounding asymmetry.
class CorrelationMatrix {
 public:
  explicit CorrelationMatrix(Matrix m) : entries_(std::move(m)) {
    if (entries_.rows() != entries_.cols()) {
      throw DimensionMismatch("correlation: matrix must be square");
    }
    const std::size_t p = entries_.rows();
    for (std::size_t k = 0; k < p; ++k) {
      if (std::abs(entries_(k, k) - 1.0) > 1e-8) {
        throw Error("correlation: diagonal entry " + std::to_string(k + 1) + " is not 1");
      }
      entries_(k, k) = 1.0;
      for (std::size_t l = k + 1; l < p; ++l) {
        if (std::abs(entries_(k, l) - entries_(l, k)) > 1e-8) {
          throw NotSymmetric("correlation: asymmetric input");
        }
        if (std::abs(entries_(k, l)) > 1.0 + 1e-12) {
          throw Error("correlation: off-diagonal entry exceeds 1 in magnitude");
        }
        entries_(l, k) = entries_(k, l);
      }
    }
  }

  static CorrelationMatrix identity(std::size_t p) {
    return CorrelationMatrix(Matrix::identity(p));
  }

  const Matrix& entries() const { return entries_; }
  std::size_t dim() const { return entries_.rows(); }

 private:
  Matrix entries_;
};

// The statistic of a psi matrix. An identically-zero column contributes
// ratio 0: a zero column means the score is exactly solved in that
// coordinate, which must not block membership.
inline SelfNormStat self_normalized_stat(const PsiMatrix& psi) {
  const std::size_t n = psi.n();
  const std::size_t p = psi.dim();
  SelfNormStat stat;
  stat.per_coordinate.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = psi.values(i, j);
      sum += v;
      sumsq += v * v;
    }
    const double ratio = sumsq > 0.0 ? std::abs(sum) / std::sqrt(sumsq) : 0.0;
    stat.per_coordinate[j] = ratio;
    if (ratio > stat.value) {
      stat.value = ratio;
      stat.argmax = j;
    }
  }
  return stat;
}

namespace detail {

// Rows transformed to Qa^{-1} psi_i, computed by a linear solve per row.
inline Matrix rotate_rows(const PsiMatrix& psi, const QrDecomposition& qa) {
  if (qa.rows() != psi.dim() || qa.cols() != psi.dim()) {
    throw DimensionMismatch("rotation: shape mismatch");
  }
  const std::size_t n = psi.n();
  const std::size_t p = psi.dim();
  Matrix out(n, p, 0.0);
  Vector row(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) row[j] = psi.values(i, j);
    Vector solved = qa.solve(row);
    for (std::size_t j = 0; j < p; ++j) out(i, j) = solved[j];
  }
  return out;
}

inline QrDecomposition rotation_factor(const Matrix& qa) {
  if (qa.rows() != qa.cols()) throw DimensionMismatch("rotation: matrix must be square");
  QrDecomposition qr(qa);
  if (qr.diag_ratio() <= 1e-12) {
    throw SingularRotation("rotation: matrix numerically singular");
  }
  return qr;
}

}  // namespace detail

inline SelfNormStat rotated_stat(const PsiMatrix& psi, const QrDecomposition& qa_factor) {
  return self_normalized_stat(PsiMatrix{detail::rotate_rows(psi, qa_factor)});
}

inline SelfNormStat rotated_stat(const PsiMatrix& psi, const Matrix& qa) {
  return rotated_stat(psi, detail::rotation_factor(qa));
}

// (k,l) entry: sum_i psi_ik psi_il / (column norm k * column norm l).
inline CorrelationMatrix plugin_correlation(const PsiMatrix& psi) {
  const std::size_t n = psi.n();
  const std::size_t p = psi.dim();
  Vector norms(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sumsq += psi.values(i, j) * psi.values(i, j);
    if (sumsq <= 0.0) {
      throw DegenerateColumn("plugin correlation: column " + std::to_string(j + 1) +
                             " is identically zero");
    }
    norms[j] = std::sqrt(sumsq);
  }
  Matrix gamma(p, p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    gamma(k, k) = 1.0;
    for (std::size_t l = k + 1; l < p; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += psi.values(i, k) * psi.values(i, l);
      const double value = s / (norms[k] * norms[l]);
      gamma(k, l) = value;
      gamma(l, k) = value;
    }
  }
  return CorrelationMatrix(std::move(gamma));
}

inline CorrelationMatrix rotated_plugin_correlation(const PsiMatrix& psi,
                                                    const QrDecomposition& qa_factor) {
  return plugin_correlation(PsiMatrix{detail::rotate_rows(psi, qa_factor)});
}

inline CorrelationMatrix rotated_plugin_correlation(const PsiMatrix& psi, const Matrix& qa) {
  return rotated_plugin_correlation(psi, detail::rotation_factor(qa));
}

}  // namespace selfnorm
