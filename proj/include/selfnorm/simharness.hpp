#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "selfnorm/confset.hpp"
#include "selfnorm/geometry.hpp"

namespace selfnorm {

enum class DesignKind { gaussian, student };
enum class NoiseKind { homoskedastic, heteroskedastic };
enum class MisspecKind { none, quadratic };

// Simulation design. Every combination this type admits has projection
// parameter exactly beta0: quadratic misspecification is restricted to the
// gaussian design (odd-moment symmetry kills E[X g(X)]), and the
// heteroskedastic scale multiplies noise that is independent of X.
struct DgpSpec {
  std::size_t n_total = 0;
  std::size_t p = 0;
  DesignKind design = DesignKind::gaussian;
  unsigned student_df = 0;
  NoiseKind noise = NoiseKind::homoskedastic;
  double sigma = 1.0;
  Vector gamma;
  MisspecKind misspec = MisspecKind::none;
  std::size_t quad_index = 0;
  Vector beta0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_total < 2) throw InvalidSpec("dgp: n_total must be at least 2");
    if (p < 1) throw InvalidSpec("dgp: p must be at least 1");
    if (2 * p > n_total) throw InvalidSpec("dgp: requires p <= n_total / 2");
    if (beta0.size() != p) throw InvalidSpec("dgp: beta0 length must equal p");
    if (design == DesignKind::student && student_df <= 8) {
      throw InvalidSpec("dgp: student design requires df > 8");
    }
    if (noise == NoiseKind::heteroskedastic && gamma.size() != p) {
      throw InvalidSpec("dgp: heteroskedastic gamma length must equal p");
    }
    if (noise == NoiseKind::homoskedastic && !(sigma >= 0.0)) {
      throw InvalidSpec("dgp: sigma must be nonnegative");
    }
    if (misspec == MisspecKind::quadratic) {
      if (quad_index >= p) throw InvalidSpec("dgp: quadratic index out of range");
      if (design != DesignKind::gaussian) {
        throw InvalidSpec("dgp: quadratic misspecification requires the gaussian design");
      }
    }
  }

  // Stable key over the population-level fields (everything except n_total
  // and seed); used to address the oracle cache.
  std::string population_key() const {
    std::ostringstream os;
    os.precision(17);
    os << "p=" << p << ";design=" << (design == DesignKind::gaussian ? "gaussian" : "student");
    os << ";df=" << student_df;
    os << ";noise=" << (noise == NoiseKind::homoskedastic ? "homo" : "hetero");
    os << ";sigma=" << sigma << ";gamma=";
    for (double g : gamma) os << g << ",";
    os << ";misspec=" << (misspec == MisspecKind::none ? "none" : "quadratic");
    os << ";qj=" << quad_index << ";beta0=";
    for (double b : beta0) os << b << ",";
    const std::string repr = os.str();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : repr) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
  }
};

namespace detail {

// Streams rows of the design/response process so both full samples and the
// large oracle passes share one code path.
class DgpRowStream {
 public:
  DgpRowStream(const DgpSpec& spec, std::uint64_t seed) : spec_(spec), gen_(substream(seed, 0)) {}

  void next_row(double* x, double& y) {
    const std::size_t p = spec_.p;
    if (spec_.design == DesignKind::gaussian) {
      for (std::size_t j = 0; j < p; ++j) x[j] = gen_.next_normal();
    } else {
      // Student t scaled to unit variance: z * sqrt((df-2)/S), S ~ chi^2_df.
      const double df = static_cast<double>(spec_.student_df);
      for (std::size_t j = 0; j < p; ++j) {
        const double z = gen_.next_normal();
        double s = 0.0;
        for (unsigned k = 0; k < spec_.student_df; ++k) {
          const double w = gen_.next_normal();
          s += w * w;
        }
        x[j] = z * std::sqrt((df - 2.0) / s);
      }
    }
    double mean = 0.0;
    for (std::size_t j = 0; j < p; ++j) mean += x[j] * spec_.beta0[j];
    if (spec_.misspec == MisspecKind::quadratic) {
      const double xj = x[spec_.quad_index];
      mean += xj * xj - 1.0;
    }
    double scale = spec_.sigma;
    if (spec_.noise == NoiseKind::heteroskedastic) {
      double dot_gamma = 0.0;
      for (std::size_t j = 0; j < p; ++j) dot_gamma += x[j] * spec_.gamma[j];
      scale = std::sqrt(1.0 + dot_gamma * dot_gamma);
    }
    y = mean + scale * gen_.next_normal();
  }

 private:
  const DgpSpec& spec_;
  SplitMix64 gen_;
};

}  // namespace detail

inline RegressionSample dgp_generate(const DgpSpec& spec) {
  spec.validate();
  Matrix x(spec.n_total, spec.p, 0.0);
  Vector y(spec.n_total, 0.0);
  detail::DgpRowStream stream(spec, spec.seed);
  Vector row(spec.p);
  for (std::size_t i = 0; i < spec.n_total; ++i) {
    stream.next_row(row.data(), y[i]);
    for (std::size_t j = 0; j < spec.p; ++j) x(i, j) = row[j];
  }
  return RegressionSample(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// Oracle cache: population-level matrices estimated once from a large sample
// and stored on disk, keyed by the population hash of the generating process.
// ---------------------------------------------------------------------------

class OracleCache {
 public:
  explicit OracleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static OracleCache from_environment() {
    if (const char* env = std::getenv("SELFNORM_CACHE_DIR"); env && *env) {
      return OracleCache(env);
    }
    return OracleCache(".selfnorm-cache");
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<Matrix> load(const std::string& name) const {
    std::ifstream in(dir_ / (name + ".txt"));
    if (!in) return std::nullopt;
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows == 0 || cols == 0) return std::nullopt;
    Matrix m(rows, cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (!(in >> m(i, j))) return std::nullopt;
      }
    }
    return m;
  }

  void store(const std::string& name, const Matrix& m) const {
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / (name + ".txt"));
    out.precision(17);
    out << m.rows() << " " << m.cols() << "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        out << m(i, j) << (j + 1 == m.cols() ? "\n" : " ");
      }
    }
  }

 private:
  std::filesystem::path dir_;
};

constexpr std::size_t kOracleRows = 1000000;

namespace detail {

inline std::uint64_t oracle_seed(const DgpSpec& spec) {
  std::uint64_t h = 0;
  for (char c : spec.population_key()) h = h * 131 + static_cast<unsigned char>(c);
  return mix64(h ^ 0x0AC1EULL);
}

// One streaming pass accumulating both sum x x^T r^2 (sandwich middle) and
// the Gram of psi = x r (correlation oracle numerator).
inline void oracle_moments(const DgpSpec& spec, std::size_t rows, Matrix& vstar, Matrix& psi_gram) {
  const std::size_t p = spec.p;
  vstar = Matrix(p, p, 0.0);
  psi_gram = Matrix(p, p, 0.0);
  DgpRowStream stream(spec, oracle_seed(spec));
  Vector x(p);
  double y = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    stream.next_row(x.data(), y);
    double fitted = 0.0;
    for (std::size_t j = 0; j < p; ++j) fitted += x[j] * spec.beta0[j];
    const double r = y - fitted;
    const double r2 = r * r;
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = j; k < p; ++k) vstar(j, k) += x[j] * x[k] * r2;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = 0; k < j; ++k) vstar(j, k) = vstar(k, j);
  }
  // psi Gram equals the un-normalized sandwich accumulator.
  psi_gram = vstar;
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = 0; k < p; ++k) vstar(j, k) /= static_cast<double>(rows);
  }
}

}  // namespace detail

// High-precision sandwich middle V(beta0), cached per population spec.
inline Matrix oracle_sandwich(const DgpSpec& spec, OracleCache* cache,
                              std::size_t rows = kOracleRows) {
  spec.validate();
  const std::string name = "vstar_" + spec.population_key() + "_" + std::to_string(rows);
  if (cache) {
    if (auto cached = cache->load(name)) return *cached;
  }
  Matrix vstar, gram;
  detail::oracle_moments(spec, rows, vstar, gram);
  if (cache) cache->store(name, vstar);
  return vstar;
}

// High-precision correlation of psi at beta0, cached per population spec.
inline CorrelationMatrix oracle_correlation(const DgpSpec& spec, OracleCache* cache,
                                            std::size_t rows = kOracleRows) {
  spec.validate();
  const std::string name = "gamma_" + spec.population_key() + "_" + std::to_string(rows);
  if (cache) {
    if (auto cached = cache->load(name)) return CorrelationMatrix(*cached);
  }
  Matrix vstar, gram;
  detail::oracle_moments(spec, rows, vstar, gram);
  const std::size_t p = spec.p;
  Matrix corr(p, p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    corr(j, j) = 1.0;
    for (std::size_t k = j + 1; k < p; ++k) {
      const double v = gram(j, k) / std::sqrt(gram(j, j) * gram(k, k));
      corr(j, k) = v;
      corr(k, j) = v;
    }
  }
  if (cache) cache->store(name, corr);
  return CorrelationMatrix(std::move(corr));
}

// ---------------------------------------------------------------------------
// Replication pool
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::thread> pool;
  pool.reserve(used);
  for (unsigned t = 0; t < used; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

enum class CoverageMethod { lin, reclin, wald_plugin, wald_oracle };

inline const char* coverage_method_name(CoverageMethod m) {
  switch (m) {
    case CoverageMethod::lin: return "lin";
    case CoverageMethod::reclin: return "reclin";
    case CoverageMethod::wald_plugin: return "wald_plugin";
    case CoverageMethod::wald_oracle: return "wald_oracle";
  }
  return "?";
}

inline CoverageMethod coverage_method_from_name(const std::string& name) {
  if (name == "lin") return CoverageMethod::lin;
  if (name == "reclin") return CoverageMethod::reclin;
  if (name == "wald_plugin") return CoverageMethod::wald_plugin;
  if (name == "wald_oracle") return CoverageMethod::wald_oracle;
  throw Error("unknown coverage method: " + name);
}

struct ReplicationOutcome {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  bool hit = false;
  double khat = std::numeric_limits<double>::quiet_NaN();
  double diam2 = std::numeric_limits<double>::quiet_NaN();
};

struct CoverageOptions {
  double alpha = 0.1;
  std::uint64_t b_draws = 0;  // 0 selects max(analysis n, 2000)
  std::size_t reps = 100;
  std::uint64_t base_seed = 1;
  unsigned threads = 1;
  bool geometry = false;
  ProbeOptions probe;
  double wald_k = 0.0;  // 0 selects sidak_quantile(alpha, p)
};

struct CoverageReport {
  DgpSpec spec;
  CoverageMethod method = CoverageMethod::lin;
  CoverageOptions options;
  std::uint64_t b_resolved = 0;
  std::size_t reps = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t failures = 0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
  double mean_khat = std::numeric_limits<double>::quiet_NaN();
  double median_diam2 = std::numeric_limits<double>::quiet_NaN();
  double runtime_s = 0.0;
  std::vector<ReplicationOutcome> outcomes;
};

namespace detail {

// Runs one replication body over the pool with exclude-and-log failure
// accounting shared by every Monte Carlo driver.
template <typename Body>
std::vector<ReplicationOutcome> run_replications(std::size_t reps, std::uint64_t base_seed,
                                                 unsigned threads, Body&& body) {
  std::vector<ReplicationOutcome> outcomes(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    ReplicationOutcome& out = outcomes[r];
    out.rep = r + 1;
    out.seed = derive_seed(base_seed, r + 1);
    try {
      body(out);
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  });
  return outcomes;
}

inline CalibratedSet calibrate_for_method(const RegressionSample& sample, CoverageMethod method,
                                          const DgpSpec& spec, double alpha, std::uint64_t b,
                                          std::uint64_t seed, double wald_k,
                                          const Matrix* oracle_vstar) {
  switch (method) {
    case CoverageMethod::lin:
      return calibrate_lin(sample, alpha, b, seed);
    case CoverageMethod::reclin:
      return calibrate_reclin(sample, alpha, b, seed);
    case CoverageMethod::wald_plugin:
      return calibrate_wald(sample, wald_k);
    case CoverageMethod::wald_oracle: {
      WaldOracleInputs oracle{Matrix::identity(spec.p), *oracle_vstar};
      return calibrate_wald(sample, wald_k, oracle);
    }
  }
  throw Error("unreachable");
}

}  // namespace detail

// Monte Carlo coverage of beta0 for the chosen construction. Failed
// replications are excluded from the tallies and logged in the outcomes;
// reps == hits + misses + failures always holds.
inline CoverageReport run_coverage(const DgpSpec& spec, CoverageMethod method,
                                   const CoverageOptions& opt, OracleCache* cache = nullptr) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  CoverageReport report;
  report.spec = spec;
  report.method = method;
  report.options = opt;
  report.reps = opt.reps;
  const std::size_t analysis_n = (spec.n_total + 1) / 2;
  report.b_resolved = resolve_bootstrap_draws(opt.b_draws, analysis_n);
  const double wald_k = opt.wald_k > 0.0 ? opt.wald_k : sidak_quantile(opt.alpha, spec.p).khat;

  Matrix oracle_vstar;
  if (method == CoverageMethod::wald_oracle) {
    oracle_vstar = oracle_sandwich(spec, cache);
  }

  report.outcomes = detail::run_replications(
      opt.reps, opt.base_seed, opt.threads, [&](ReplicationOutcome& out) {
        DgpSpec rep_spec = spec;
        rep_spec.seed = out.seed;
        const RegressionSample sample = dgp_generate(rep_spec);
        CalibratedSet set =
            detail::calibrate_for_method(sample, method, spec, opt.alpha, report.b_resolved,
                                         out.seed, wald_k, &oracle_vstar);
        out.hit = member(set, spec.beta0);
        out.khat = set.khat.khat;
        if (opt.geometry) {
          if (set.variant == SetVariant::wald || set.variant == SetVariant::wald_oracle) {
            out.diam2 = 2.0 * norm2(*set.wald_halfwidths);
          } else {
            ProbeOptions probe = opt.probe;
            probe.seed = derive_seed(out.seed, 3);
            auto oracle_fn = [&set](const Vector& b) { return member(set, b); };
            out.diam2 = diameter_estimate(oracle_fn, set.analysis_center, probe).diam2;
          }
        }
      });

  std::vector<double> khats;
  std::vector<double> diams;
  for (const auto& out : report.outcomes) {
    if (out.failed) {
      ++report.failures;
      continue;
    }
    if (out.hit) {
      ++report.hits;
    } else {
      ++report.misses;
    }
    khats.push_back(out.khat);
    if (std::isfinite(out.diam2)) diams.push_back(out.diam2);
  }
  const std::size_t effective = report.hits + report.misses;
  if (effective > 0) {
    report.coverage = static_cast<double>(report.hits) / static_cast<double>(effective);
    report.mc_se = std::sqrt(report.coverage * (1.0 - report.coverage) /
                             static_cast<double>(effective));
    double sum = 0.0;
    for (double k : khats) sum += k;
    report.mean_khat = sum / static_cast<double>(khats.size());
  }
  if (!diams.empty()) report.median_diam2 = detail::median(diams);
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Width scaling across an n grid
// ---------------------------------------------------------------------------

struct GridOptions {
  double alpha = 0.1;
  std::uint64_t b_draws = 0;
  std::size_t reps = 100;
  std::uint64_t base_seed = 1;
  unsigned threads = 1;
  ProbeOptions probe;
};

struct WidthCell {
  std::size_t n = 0;
  ReplicationOutcome outcome;
};

struct WidthRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double median_diam2 = std::numeric_limits<double>::quiet_NaN();
  double median_khat = std::numeric_limits<double>::quiet_NaN();
  // median at the previous (smaller) grid point divided by this one;
  // about sqrt(2) when n doubles.
  double ratio_vs_prev = std::numeric_limits<double>::quiet_NaN();
};

struct WidthReport {
  DgpSpec spec;
  CoverageMethod method = CoverageMethod::reclin;
  GridOptions options;
  std::vector<std::size_t> n_grid;
  std::vector<WidthRow> rows;
  std::vector<WidthCell> cells;
  double runtime_s = 0.0;
};

inline WidthReport run_width_scaling(const DgpSpec& base, const std::vector<std::size_t>& n_grid,
                                     CoverageMethod method, const GridOptions& opt) {
  if (method != CoverageMethod::lin && method != CoverageMethod::reclin) {
    throw InvalidSpec("width scaling: method must be lin or reclin");
  }
  const auto start = std::chrono::steady_clock::now();
  WidthReport report;
  report.spec = base;
  report.method = method;
  report.options = opt;
  report.n_grid = n_grid;

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    DgpSpec spec = base;
    spec.n_total = n_grid[gi];
    spec.validate();
    const std::uint64_t grid_seed = derive_seed(opt.base_seed, 1000 + gi);
    const std::uint64_t b_resolved = resolve_bootstrap_draws(opt.b_draws, (spec.n_total + 1) / 2);

    auto outcomes = detail::run_replications(
        opt.reps, grid_seed, opt.threads, [&](ReplicationOutcome& out) {
          DgpSpec rep_spec = spec;
          rep_spec.seed = out.seed;
          const RegressionSample sample = dgp_generate(rep_spec);
          CalibratedSet set = method == CoverageMethod::lin
                                  ? calibrate_lin(sample, opt.alpha, b_resolved, out.seed)
                                  : calibrate_reclin(sample, opt.alpha, b_resolved, out.seed);
          out.khat = set.khat.khat;
          out.hit = member(set, spec.beta0);
          ProbeOptions probe = opt.probe;
          probe.seed = derive_seed(out.seed, 3);
          auto oracle_fn = [&set](const Vector& b) { return member(set, b); };
          out.diam2 = diameter_estimate(oracle_fn, set.analysis_center, probe).diam2;
        });

    WidthRow row;
    row.n = spec.n_total;
    row.reps = opt.reps;
    std::vector<double> diams;
    std::vector<double> khats;
    for (auto& out : outcomes) {
      if (out.failed) {
        ++row.failures;
      } else {
        diams.push_back(out.diam2);
        khats.push_back(out.khat);
      }
      report.cells.push_back(WidthCell{spec.n_total, std::move(out)});
    }
    row.median_diam2 = detail::median(diams);
    row.median_khat = detail::median(khats);
    if (gi > 0) {
      row.ratio_vs_prev = report.rows.back().median_diam2 / row.median_diam2;
    }
    report.rows.push_back(row);
  }
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Correlation-matrix concentration across an n grid
// ---------------------------------------------------------------------------

struct ConcentrationCell {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double deviation = std::numeric_limits<double>::quiet_NaN();
};

struct ConcentrationRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double median_deviation = std::numeric_limits<double>::quiet_NaN();
};

struct ConcentrationReport {
  DgpSpec spec;
  GridOptions options;
  std::size_t oracle_rows = kOracleRows;
  std::vector<std::size_t> n_grid;
  std::vector<ConcentrationRow> rows;
  std::vector<ConcentrationCell> cells;
  double runtime_s = 0.0;
};

// Median of || plugin correlation at beta0 minus the population oracle ||_max
// over replications, per grid point. Rates like sqrt(p log p / n) show up as
// a ratio of about 2 between n and 4n.
inline ConcentrationReport run_concentration(const DgpSpec& base,
                                             const std::vector<std::size_t>& n_grid,
                                             const GridOptions& opt, OracleCache* cache = nullptr,
                                             std::size_t oracle_rows = kOracleRows) {
  const auto start = std::chrono::steady_clock::now();
  ConcentrationReport report;
  report.spec = base;
  report.options = opt;
  report.oracle_rows = oracle_rows;
  report.n_grid = n_grid;
  const CorrelationMatrix oracle = oracle_correlation(base, cache, oracle_rows);

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    DgpSpec spec = base;
    spec.n_total = n_grid[gi];
    spec.validate();
    const std::uint64_t grid_seed = derive_seed(opt.base_seed, 2000 + gi);

    std::vector<ConcentrationCell> cells(opt.reps);
    detail::parallel_for(opt.reps, opt.threads, [&](std::size_t r) {
      ConcentrationCell& cell = cells[r];
      cell.n = spec.n_total;
      cell.rep = r + 1;
      cell.seed = derive_seed(grid_seed, r + 1);
      try {
        DgpSpec rep_spec = spec;
        rep_spec.seed = cell.seed;
        const RegressionSample sample = dgp_generate(rep_spec);
        const CorrelationMatrix gamma = plugin_correlation(linreg_psi(sample, spec.beta0));
        cell.deviation = max_abs_diff(gamma.entries(), oracle.entries());
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    });

    ConcentrationRow row;
    row.n = spec.n_total;
    row.reps = opt.reps;
    std::vector<double> devs;
    for (auto& cell : cells) {
      if (cell.failed) {
        ++row.failures;
      } else {
        devs.push_back(cell.deviation);
      }
      report.cells.push_back(std::move(cell));
    }
    row.median_deviation = detail::median(devs);
    report.rows.push_back(row);
  }
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Geometric similarity to the oracle Wald rectangle across an n grid
// ---------------------------------------------------------------------------

struct HausdorffCell {
  std::size_t n = 0;
  ReplicationOutcome outcome;
  double diam2_waldo = std::numeric_limits<double>::quiet_NaN();
};

struct HausdorffRow {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double median_d2 = std::numeric_limits<double>::quiet_NaN();
  double median_diam2_waldo = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
};

struct HausdorffReport {
  DgpSpec spec;
  GridOptions options;
  std::vector<std::size_t> n_grid;
  std::vector<HausdorffRow> rows;
  std::vector<HausdorffCell> cells;
  double runtime_s = 0.0;
};

// Per replication: calibrate the rectangular set, then build the oracle Wald
// rectangle on the same analysis half with the same quantile, and measure the
// sampled Hausdorff distance between them relative to the rectangle diameter.
inline HausdorffReport run_hausdorff_similarity(const DgpSpec& base,
                                                const std::vector<std::size_t>& n_grid,
                                                const GridOptions& opt,
                                                OracleCache* cache = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  HausdorffReport report;
  report.spec = base;
  report.options = opt;
  report.n_grid = n_grid;
  const Matrix vstar = oracle_sandwich(base, cache);

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    DgpSpec spec = base;
    spec.n_total = n_grid[gi];
    spec.validate();
    const std::uint64_t grid_seed = derive_seed(opt.base_seed, 3000 + gi);
    const std::uint64_t b_resolved = resolve_bootstrap_draws(opt.b_draws, (spec.n_total + 1) / 2);

    std::vector<HausdorffCell> cells(opt.reps);
    detail::parallel_for(opt.reps, opt.threads, [&](std::size_t r) {
      HausdorffCell& cell = cells[r];
      cell.n = spec.n_total;
      ReplicationOutcome& out = cell.outcome;
      out.rep = r + 1;
      out.seed = derive_seed(grid_seed, r + 1);
      try {
        DgpSpec rep_spec = spec;
        rep_spec.seed = out.seed;
        const RegressionSample sample = dgp_generate(rep_spec);
        CalibratedSet set = calibrate_reclin(sample, opt.alpha, b_resolved, out.seed);
        out.khat = set.khat.khat;
        WaldOracleInputs oracle{Matrix::identity(spec.p), vstar};
        const CalibratedSet waldo = calibrate_wald(*set.analysis, set.khat.khat, oracle);
        cell.diam2_waldo = 2.0 * norm2(*waldo.wald_halfwidths);
        ProbeOptions probe = opt.probe;
        probe.seed = derive_seed(out.seed, 4);
        auto oracle_fn = [&set](const Vector& b) { return member(set, b); };
        out.diam2 = hausdorff_member_rect(oracle_fn, set.analysis_center, *waldo.wald_center,
                                          *waldo.wald_halfwidths, probe);
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    });

    HausdorffRow row;
    row.n = spec.n_total;
    row.reps = opt.reps;
    std::vector<double> d2s;
    std::vector<double> diams;
    for (auto& cell : cells) {
      if (cell.outcome.failed) {
        ++row.failures;
      } else {
        d2s.push_back(cell.outcome.diam2);
        diams.push_back(cell.diam2_waldo);
      }
      report.cells.push_back(std::move(cell));
    }
    row.median_d2 = detail::median(d2s);
    row.median_diam2_waldo = detail::median(diams);
    row.ratio = row.median_d2 / row.median_diam2_waldo;
    report.rows.push_back(row);
  }
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace selfnorm
