#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selfnorm/calibrate.hpp"
#include "selfnorm/estimating.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/selfnorm.hpp"

namespace selfnorm {

struct SplitIndices {
  std::vector<std::size_t> first_half;   // analysis indices, size ceil(N/2)
  std::vector<std::size_t> second_half;  // pilot indices
};

// Uniform random split; with odd N the analysis half gets the extra point.
inline SplitIndices split_sample(std::size_t n_total, std::uint64_t seed) {
  if (n_total < 2) throw TooFew("split_sample: need at least 2 observations");
  std::vector<std::size_t> perm(n_total);
  for (std::size_t i = 0; i < n_total; ++i) perm[i] = i;
  SplitMix64 gen = substream(seed, 0);
  shuffle(perm, gen);
  const std::size_t n1 = (n_total + 1) / 2;
  SplitIndices split;
  split.first_half.assign(perm.begin(), perm.begin() + n1);
  split.second_half.assign(perm.begin() + n1, perm.end());
  return split;
}

enum class SetVariant { lin, reclin, wald, wald_oracle };

inline const char* variant_name(SetVariant v) {
  switch (v) {
    case SetVariant::lin: return "lin";
    case SetVariant::reclin: return "reclin";
    case SetVariant::wald: return "wald";
    case SetVariant::wald_oracle: return "wald_oracle";
  }
  return "?";
}

inline SetVariant variant_from_name(const std::string& name) {
  if (name == "lin") return SetVariant::lin;
  if (name == "reclin") return SetVariant::reclin;
  if (name == "wald") return SetVariant::wald;
  if (name == "wald_oracle") return SetVariant::wald_oracle;
  throw Error("unknown set variant: " + name);
}

// Frozen membership oracle. For lin/reclin it carries the analysis half, the
// pilot fit from the other half, the bootstrap quantile and (reclin) the
// rotation matrix; for wald variants it is an explicit hyper-rectangle.
struct CalibratedSet {
  SetVariant variant = SetVariant::lin;
  double alpha = 0.0;
  QuantileValue khat;
  Vector pilot_beta;
  std::optional<RegressionSample> analysis;
  Vector analysis_center;  // least-squares point of the analysis half
  std::optional<Matrix> rotation;
  std::optional<Vector> wald_center;
  std::optional<Vector> wald_halfwidths;

  // Prefactored rotation, rebuilt on deserialization; never serialized.
  std::shared_ptr<const QrDecomposition> rotation_factor;

  std::size_t dim() const {
    if (variant == SetVariant::lin || variant == SetVariant::reclin) {
      return pilot_beta.size();
    }
    return wald_center ? wald_center->size() : 0;
  }
};

inline void finalize_rotation(CalibratedSet& set) {
  if (set.variant == SetVariant::reclin) {
    if (!set.rotation) throw Error("reclin set is missing its rotation matrix");
    set.rotation_factor =
        std::make_shared<const QrDecomposition>(detail::rotation_factor(*set.rotation));
  }
}

inline std::uint64_t resolve_bootstrap_draws(std::uint64_t b_draws, std::size_t analysis_n) {
  return b_draws > 0 ? b_draws : std::max<std::uint64_t>(analysis_n, 2000);
}

inline Matrix gram_matrix(const RegressionSample& s);

namespace detail {

inline CalibratedSet calibrate_split(const RegressionSample& sample, double alpha,
                                     std::uint64_t b_draws, std::uint64_t seed,
                                     bool rectangular, unsigned threads) {
  check_alpha(alpha);
  const SplitIndices split = split_sample(sample.n(), derive_seed(seed, 1));
  RegressionSample analysis = subsample(sample, split.first_half);
  const RegressionSample pilot = subsample(sample, split.second_half);
  if (pilot.n() < pilot.dim()) {
    throw SingularDesign("calibrate: pilot half smaller than dimension");
  }

  CalibratedSet set;
  set.variant = rectangular ? SetVariant::reclin : SetVariant::lin;
  set.alpha = alpha;
  set.pilot_beta = least_squares(pilot);
  const PsiMatrix psi = linreg_psi(analysis, set.pilot_beta);

  CorrelationMatrix gamma = [&] {
    if (!rectangular) return plugin_correlation(psi);
    const Matrix gram = gram_matrix(pilot);
    set.rotation = gram;
    return rotated_plugin_correlation(psi, gram);
  }();

  const std::uint64_t b_resolved = resolve_bootstrap_draws(b_draws, analysis.n());
  const std::uint64_t boot_seed = derive_seed(seed, 2);
  set.khat = bootstrap_quantile(gamma, alpha, b_resolved, boot_seed, threads);
  set.analysis_center = least_squares(analysis);
  set.analysis = std::move(analysis);
  finalize_rotation(set);
  return set;
}

}  // namespace detail

// Algorithm steps: split, pilot least squares on the second half, plug-in
// correlation of psi on the analysis half at the pilot fit, bootstrap
// quantile. b_draws = 0 selects the default max(n, 2000); passing the
// analysis-half size reproduces the published B = n configuration.
inline CalibratedSet calibrate_lin(const RegressionSample& sample, double alpha,
                                   std::uint64_t b_draws, std::uint64_t seed,
                                   unsigned threads = 1) {
  return detail::calibrate_split(sample, alpha, b_draws, seed, false, threads);
}

// Rectangular variant: the pilot half also supplies the Gram matrix used to
// rotate psi before both the correlation matrix and the statistic.
inline CalibratedSet calibrate_reclin(const RegressionSample& sample, double alpha,
                                      std::uint64_t b_draws, std::uint64_t seed,
                                      unsigned threads = 1) {
  return detail::calibrate_split(sample, alpha, b_draws, seed, true, threads);
}

inline double statistic_lin(const CalibratedSet& set, const Vector& beta) {
  if (!set.analysis) throw Error("set has no analysis sample");
  return self_normalized_stat(linreg_psi(*set.analysis, beta)).value;
}

inline double statistic_reclin(const CalibratedSet& set, const Vector& beta) {
  if (!set.analysis) throw Error("set has no analysis sample");
  if (!set.rotation_factor) throw Error("set has no rotation factor");
  return rotated_stat(linreg_psi(*set.analysis, beta), *set.rotation_factor).value;
}

// Membership uses "<= khat" throughout: inverting the test accepts beta when
// the statistic does not exceed the calibrated quantile.
inline bool member_lin(const CalibratedSet& set, const Vector& beta) {
  if (set.variant != SetVariant::lin) throw Error("member_lin: wrong variant");
  if (beta.size() != set.dim()) throw DimensionMismatch("member: beta length mismatch");
  return statistic_lin(set, beta) <= set.khat.khat;
}

inline bool member_reclin(const CalibratedSet& set, const Vector& beta) {
  if (set.variant != SetVariant::reclin) throw Error("member_reclin: wrong variant");
  if (beta.size() != set.dim()) throw DimensionMismatch("member: beta length mismatch");
  return statistic_reclin(set, beta) <= set.khat.khat;
}

// (1/n) sum x_i x_i^T (y_i - x_i^T beta)^2.
inline Matrix sandwich_variance(const RegressionSample& s, const Vector& beta) {
  if (beta.size() != s.dim()) throw DimensionMismatch("sandwich_variance: beta length mismatch");
  const std::size_t p = s.dim();
  Matrix v(p, p, 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double* row = s.x.row_data(i);
    double fitted = 0.0;
    for (std::size_t j = 0; j < p; ++j) fitted += row[j] * beta[j];
    const double r2 = (s.y[i] - fitted) * (s.y[i] - fitted);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = j; k < p; ++k) v(j, k) += row[j] * row[k] * r2;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = j; k < p; ++k) {
      v(j, k) /= static_cast<double>(s.n());
      v(k, j) = v(j, k);
    }
  }
  return v;
}

// (1/n) sum x_i x_i^T.
inline Matrix gram_matrix(const RegressionSample& s) {
  const std::size_t p = s.dim();
  Matrix g(p, p, 0.0);
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double* row = s.x.row_data(i);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = j; k < p; ++k) g(j, k) += row[j] * row[k];
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = j; k < p; ++k) {
      g(j, k) /= static_cast<double>(s.n());
      g(k, j) = g(j, k);
    }
  }
  return g;
}

struct WaldOracleInputs {
  Matrix sigma;   // population Gram matrix
  Matrix vstar;   // sandwich middle at the true parameter
};

// Explicit hyper-rectangle centered at the least-squares fit with half-widths
// k_n sqrt(M_jj / n), where M is the plug-in or oracle sandwich.
inline CalibratedSet calibrate_wald(const RegressionSample& sample, double k_n,
                                    const std::optional<WaldOracleInputs>& oracle = {}) {
  if (!(k_n >= 0.0)) throw OutOfRange("calibrate_wald: k_n must be nonnegative");
  CalibratedSet set;
  set.variant = oracle ? SetVariant::wald_oracle : SetVariant::wald;
  const Vector beta_hat = least_squares(sample);
  const std::size_t p = sample.dim();

  Matrix middle;
  Matrix outer;
  if (oracle) {
    if (oracle->sigma.rows() != p || oracle->sigma.cols() != p || oracle->vstar.rows() != p ||
        oracle->vstar.cols() != p) {
      throw DimensionMismatch("calibrate_wald: oracle shape mismatch");
    }
    middle = oracle->vstar;
    outer = oracle->sigma;
  } else {
    middle = sandwich_variance(sample, beta_hat);
    outer = gram_matrix(sample);
  }
  SpdFactor factor;
  try {
    factor = cholesky_jittered(outer);
  } catch (const NotFactorable&) {
    throw SingularDesign("calibrate_wald: Gram matrix not factorable");
  }
  // M = outer^{-1} middle outer^{-1}, via two triangular solves.
  const Matrix half = solve_spd(factor, middle);
  const Matrix sandwich = solve_spd(factor, transpose(half));

  Vector halfwidths(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double mjj = std::max(sandwich(j, j), 0.0);
    halfwidths[j] = k_n * std::sqrt(mjj / static_cast<double>(sample.n()));
  }
  set.khat = QuantileValue{k_n, QuantileMethod::bootstrap, 0, 0};
  set.pilot_beta = beta_hat;
  set.wald_center = beta_hat;
  set.wald_halfwidths = std::move(halfwidths);
  return set;
}

inline bool member_wald(const CalibratedSet& set, const Vector& beta) {
  if (set.variant != SetVariant::wald && set.variant != SetVariant::wald_oracle) {
    throw Error("member_wald: wrong variant");
  }
  if (!set.wald_center || beta.size() != set.wald_center->size()) {
    throw DimensionMismatch("member: beta length mismatch");
  }
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (std::abs(beta[j] - (*set.wald_center)[j]) > (*set.wald_halfwidths)[j]) return false;
  }
  return true;
}

inline bool member(const CalibratedSet& set, const Vector& beta) {
  switch (set.variant) {
    case SetVariant::lin: return member_lin(set, beta);
    case SetVariant::reclin: return member_reclin(set, beta);
    default: return member_wald(set, beta);
  }
}

// Statistic reported alongside membership: the self-normalized value for
// lin/reclin, the max coordinate ratio |beta_j - c_j| / h_j for rectangles.
inline std::pair<double, double> membership_statistic(const CalibratedSet& set,
                                                      const Vector& beta) {
  switch (set.variant) {
    case SetVariant::lin: return {statistic_lin(set, beta), set.khat.khat};
    case SetVariant::reclin: return {statistic_reclin(set, beta), set.khat.khat};
    default: {
      if (!set.wald_center || beta.size() != set.wald_center->size()) {
        throw DimensionMismatch("member: beta length mismatch");
      }
      double ratio = 0.0;
      for (std::size_t j = 0; j < beta.size(); ++j) {
        const double h = (*set.wald_halfwidths)[j];
        const double d = std::abs(beta[j] - (*set.wald_center)[j]);
        ratio = std::max(ratio, h > 0.0 ? d / h : (d > 0.0 ? HUGE_VAL : 0.0));
      }
      return {ratio, 1.0};
    }
  }
}

}  // namespace selfnorm
