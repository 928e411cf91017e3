#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "selfnorm/linalg.hpp"
#include "selfnorm/matrix.hpp"

namespace selfnorm {

// Covariate matrix (n x p) plus responses (n).
struct RegressionSample {
  Matrix x;
  Vector y;

  RegressionSample(Matrix x_in, Vector y_in) : x(std::move(x_in)), y(std::move(y_in)) {
    if (y.size() != x.rows()) {
      throw DimensionMismatch("sample: response length does not match row count");
    }
    if (!all_finite(x) || !all_finite(y)) {
      throw Error("sample: non-finite entries");
    }
  }

  std::size_t n() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }
};

inline RegressionSample subsample(const RegressionSample& s, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw TooFew("subsample: no rows selected");
  Matrix x(rows.size(), s.dim(), 0.0);
  Vector y(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= s.n()) throw DimensionMismatch("subsample: row index out of range");
    for (std::size_t j = 0; j < s.dim(); ++j) x(i, j) = s.x(rows[i], j);
    y[i] = s.y[rows[i]];
  }
  return RegressionSample(std::move(x), std::move(y));
}

inline Vector least_squares(const RegressionSample& s) { return least_squares(s.x, s.y); }

// Row i holds psi(X_i, theta)^T; the output dimension always equals dim(theta).
struct PsiMatrix {
  Matrix values;

  std::size_t n() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

// psi rows x_i (y_i - x_i^T beta): the estimating equation whose root is the
// least-squares fit / projection parameter.
inline PsiMatrix linreg_psi(const RegressionSample& s, const Vector& beta) {
  if (beta.size() != s.dim()) throw DimensionMismatch("linreg_psi: beta length mismatch");
  Matrix psi(s.n(), s.dim(), 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double* row = s.x.row_data(i);
    double fitted = 0.0;
    for (std::size_t j = 0; j < s.dim(); ++j) fitted += row[j] * beta[j];
    const double resid = s.y[i] - fitted;
    for (std::size_t j = 0; j < s.dim(); ++j) psi(i, j) = row[j] * resid;
  }
  return PsiMatrix{std::move(psi)};
}

enum class GlmFamily { gaussian, logistic, poisson };

inline const char* family_name(GlmFamily f) {
  switch (f) {
    case GlmFamily::gaussian: return "gaussian";
    case GlmFamily::logistic: return "logistic";
    case GlmFamily::poisson: return "poisson";
  }
  return "?";
}

// Mean function: derivative of the cumulant A.
inline double glm_mean(GlmFamily f, double v) {
  switch (f) {
    case GlmFamily::gaussian: return v;
    case GlmFamily::logistic: return 1.0 / (1.0 + std::exp(-v));
    case GlmFamily::poisson: return std::exp(v);
  }
  return 0.0;
}

// Second derivative of A; the Newton weight.
inline double glm_weight(GlmFamily f, double v) {
  switch (f) {
    case GlmFamily::gaussian: return 1.0;
    case GlmFamily::logistic: {
      const double m = 1.0 / (1.0 + std::exp(-v));
      return m * (1.0 - m);
    }
    case GlmFamily::poisson: return std::exp(v);
  }
  return 0.0;
}

inline void check_glm_response(const RegressionSample& s, GlmFamily f) {
  if (f == GlmFamily::logistic) {
    for (double yi : s.y) {
      if (yi != 0.0 && yi != 1.0) {
        throw InvalidResponse("logistic family requires responses in {0,1}");
      }
    }
  } else if (f == GlmFamily::poisson) {
    for (double yi : s.y) {
      if (yi < 0.0) throw InvalidResponse("poisson family requires nonnegative responses");
    }
  }
}

// psi rows (A'(theta^T x_i) - y_i) x_i. For the gaussian family this is the
// negative of linreg_psi; both are valid estimating equations and the
// self-normalized statistic is invariant to per-column sign flips.
inline PsiMatrix glm_psi(const RegressionSample& s, GlmFamily f, const Vector& theta) {
  if (theta.size() != s.dim()) throw DimensionMismatch("glm_psi: theta length mismatch");
  check_glm_response(s, f);
  Matrix psi(s.n(), s.dim(), 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double* row = s.x.row_data(i);
    double eta = 0.0;
    for (std::size_t j = 0; j < s.dim(); ++j) eta += row[j] * theta[j];
    const double factor = glm_mean(f, eta) - s.y[i];
    for (std::size_t j = 0; j < s.dim(); ++j) psi(i, j) = row[j] * factor;
  }
  return PsiMatrix{std::move(psi)};
}

namespace detail {

inline Vector glm_score(const RegressionSample& s, GlmFamily f, const Vector& theta) {
  Vector score(s.dim(), 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double* row = s.x.row_data(i);
    double eta = 0.0;
    for (std::size_t j = 0; j < s.dim(); ++j) eta += row[j] * theta[j];
    const double factor = glm_mean(f, eta) - s.y[i];
    for (std::size_t j = 0; j < s.dim(); ++j) score[j] += row[j] * factor;
  }
  for (double& v : score) v /= static_cast<double>(s.n());
  return score;
}

}  // namespace detail

// Newton iteration on the mean score with step halving. The gaussian family
// is the least-squares fit in closed form, so it is dispatched directly.
inline Vector glm_fit(const RegressionSample& s, GlmFamily f) {
  check_glm_response(s, f);
  if (f == GlmFamily::gaussian) return least_squares(s);

  const std::size_t p = s.dim();
  const double score_tol = 1e-9;
  Vector theta(p, 0.0);
  Vector score = detail::glm_score(s, f, theta);
  double score_norm = norm2(score);

  for (int iter = 0; iter < 100; ++iter) {
    if (norm_inf(score) <= score_tol) return theta;
    // Newton system: mean weighted Gram times step = score.
    Matrix hess(p, p, 0.0);
    for (std::size_t i = 0; i < s.n(); ++i) {
      const double* row = s.x.row_data(i);
      double eta = 0.0;
      for (std::size_t j = 0; j < p; ++j) eta += row[j] * theta[j];
      const double w = glm_weight(f, eta) / static_cast<double>(s.n());
      for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) hess(j, k) += w * row[j] * row[k];
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < j; ++k) hess(j, k) = hess(k, j);
    }
    Vector step;
    try {
      step = solve_spd(cholesky_jittered(hess), score);
    } catch (const NotFactorable&) {
      throw SingularDesign("glm_fit: singular Newton system");
    }
    double lambda = 1.0;
    Vector candidate;
    Vector cand_score;
    double cand_norm = 0.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving) {
      candidate = theta;
      for (std::size_t j = 0; j < p; ++j) candidate[j] -= lambda * step[j];
      cand_score = detail::glm_score(s, f, candidate);
      cand_norm = norm2(cand_score);
      if (cand_norm < score_norm || norm_inf(cand_score) <= score_tol) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      throw NoConvergence("glm_fit: line search stalled, score norm " + std::to_string(score_norm));
    }
    theta = candidate;
    score = cand_score;
    score_norm = cand_norm;
    if (f == GlmFamily::logistic && norm2(theta) > 1e6) {
      throw Separation("glm_fit: logistic iterates diverging (separated data)");
    }
  }
  if (norm_inf(score) <= score_tol) return theta;
  throw NoConvergence("glm_fit: no convergence after 100 iterations, score norm " +
                      std::to_string(score_norm));
}

struct QuantileSpec {
  double tau;

  explicit QuantileSpec(double t) : tau(t) {
    if (!(t > 0.0 && t < 1.0)) throw OutOfRange("quantile: tau must lie in (0,1)");
  }
};

// psi entries 1(x_i <= theta) - tau, a single-column estimating equation.
inline PsiMatrix quantile_psi(const Vector& data, const QuantileSpec& spec, double theta) {
  if (data.empty()) throw TooFew("quantile_psi: empty data");
  if (!all_finite(data)) throw Error("quantile_psi: non-finite data");
  Matrix psi(data.size(), 1, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    psi(i, 0) = (data[i] <= theta ? 1.0 : 0.0) - spec.tau;
  }
  return PsiMatrix{std::move(psi)};
}

// Smallest theta with empirical CDF >= tau: the ceil(tau*n)-th ascending
// order statistic (1-based).
inline double quantile_fit(const Vector& data, const QuantileSpec& spec) {
  if (data.empty()) throw TooFew("quantile_fit: empty data");
  if (!all_finite(data)) throw Error("quantile_fit: non-finite data");
  const std::size_t n = data.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(spec.tau * static_cast<double>(n)));
  // Guard the ceil against floating-point edge cases of tau*n.
  while (k > 1 && static_cast<double>(k - 1) / static_cast<double>(n) >= spec.tau) --k;
  while (k < n && static_cast<double>(k) / static_cast<double>(n) < spec.tau) ++k;
  k = std::min(std::max<std::size_t>(k, 1), n);
  Vector sorted(data);
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[k - 1];
}

}  // namespace selfnorm
