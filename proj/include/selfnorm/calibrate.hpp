#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "selfnorm/linalg.hpp"
#include "selfnorm/normal.hpp"
#include "selfnorm/rng.hpp"
#include "selfnorm/selfnorm.hpp"

namespace selfnorm {

enum class QuantileMethod { bonferroni, sidak, bootstrap };

inline const char* method_name(QuantileMethod m) {
  switch (m) {
    case QuantileMethod::bonferroni: return "bonferroni";
    case QuantileMethod::sidak: return "sidak";
    case QuantileMethod::bootstrap: return "bootstrap";
  }
  return "?";
}

struct QuantileValue {
  double khat = 0.0;
  QuantileMethod method = QuantileMethod::bootstrap;
  std::uint64_t b_used = 0;
  std::uint64_t seed_used = 0;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw OutOfRange("alpha must lie in (0,1)");
}

}  // namespace detail

inline QuantileValue bonferroni_quantile(double alpha, std::size_t p) {
  detail::check_alpha(alpha);
  if (p < 1) throw OutOfRange("bonferroni: p must be at least 1");
  const double u = 1.0 - alpha / (2.0 * static_cast<double>(p));
  return QuantileValue{normal_quantile(u), QuantileMethod::bonferroni, 0, 0};
}

inline QuantileValue sidak_quantile(double alpha, std::size_t p) {
  detail::check_alpha(alpha);
  if (p < 1) throw OutOfRange("sidak: p must be at least 1");
  if (p == 1) {
    // Identical to Bonferroni at p = 1; sharing the expression keeps the
    // sidak <= bonferroni ordering exact in floating point.
    return QuantileValue{normal_quantile(1.0 - alpha / 2.0), QuantileMethod::sidak, 0, 0};
  }
  // (1-alpha)^{1/p} via exp(log1p(-alpha)/p) for accuracy at large p.
  const double root = std::exp(std::log1p(-alpha) / static_cast<double>(p));
  const double u = 0.5 * (1.0 + root);
  return QuantileValue{normal_quantile(u), QuantileMethod::sidak, 0, 0};
}

// Empirical version of the bootstrap quantile: the smallest t >= 0 such that
// the fraction of max-statistics exceeding t is at most alpha. Equals the
// (B - floor(alpha B))-th ascending order statistic. Exposed separately so
// tests can inject a fixed multiset.
inline double max_stat_quantile(std::vector<double> max_stats, double alpha) {
  detail::check_alpha(alpha);
  if (max_stats.empty()) throw OutOfRange("max_stat_quantile: empty sample");
  const std::size_t b = max_stats.size();
  const std::size_t allowed = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(b)));
  if (allowed >= b) return 0.0;
  const std::size_t rank = b - allowed;  // 1-based ascending
  std::nth_element(max_stats.begin(), max_stats.begin() + (rank - 1), max_stats.end());
  return max_stats[rank - 1];
}

// Draws Z_b = L g_b with g_b standard normal from the per-draw substream
// (seed, b) and records ||Z_b||_inf. Chunked over threads; draw b is computed
// identically no matter which thread runs it.
inline std::vector<double> bootstrap_max_stats(const CorrelationMatrix& gamma,
                                               std::uint64_t b_draws, std::uint64_t seed,
                                               unsigned threads = 1) {
  if (b_draws < 1) throw OutOfRange("bootstrap: B must be at least 1");
  const SpdFactor factor = cholesky_jittered(gamma.entries());
  const std::size_t p = gamma.dim();
  std::vector<double> stats(b_draws, 0.0);

  auto worker = [&](std::uint64_t begin, std::uint64_t end) {
    Vector g(p);
    for (std::uint64_t b = begin; b < end; ++b) {
      SplitMix64 stream = substream(seed, b);
      for (std::size_t j = 0; j < p; ++j) g[j] = stream.next_normal();
      double m = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) z += factor.lower(i, j) * g[j];
        m = std::max(m, std::abs(z));
      }
      stats[b] = m;
    }
  };

  if (threads <= 1 || b_draws < 2) {
    worker(0, b_draws);
    return stats;
  }
  const unsigned used = static_cast<unsigned>(
      std::min<std::uint64_t>(threads, b_draws));
  std::vector<std::thread> pool;
  pool.reserve(used);
  const std::uint64_t chunk = (b_draws + used - 1) / used;
  for (unsigned t = 0; t < used; ++t) {
    const std::uint64_t begin = t * chunk;
    const std::uint64_t end = std::min<std::uint64_t>(begin + chunk, b_draws);
    if (begin >= end) break;
    pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();
  return stats;
}

inline QuantileValue bootstrap_quantile(const CorrelationMatrix& gamma, double alpha,
                                        std::uint64_t b_draws, std::uint64_t seed,
                                        unsigned threads = 1) {
  detail::check_alpha(alpha);
  std::vector<double> stats = bootstrap_max_stats(gamma, b_draws, seed, threads);
  const double khat = max_stat_quantile(std::move(stats), alpha);
  return QuantileValue{khat, QuantileMethod::bootstrap, b_draws, seed};
}

}  // namespace selfnorm
