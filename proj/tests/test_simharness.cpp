#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "selfnorm/simharness.hpp"
#include "test_support.hpp"

using namespace selfnorm;

namespace {

DgpSpec base_spec(std::size_t n, std::size_t p) {
  DgpSpec spec;
  spec.n_total = n;
  spec.p = p;
  spec.design = DesignKind::gaussian;
  spec.noise = NoiseKind::homoskedastic;
  spec.sigma = 1.0;
  spec.misspec = MisspecKind::none;
  spec.beta0.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) spec.beta0[j] = 1.0 - 0.5 * static_cast<double>(j);
  spec.seed = 42;
  return spec;
}

struct TempCacheDir {
  std::filesystem::path path;
  explicit TempCacheDir(const char* tag)
      : path(std::filesystem::temp_directory_path() / tag) {
    std::filesystem::remove_all(path);
  }
  ~TempCacheDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("dgp validation rejects inconsistent specs") {
  DgpSpec spec = base_spec(40, 3);
  spec.p = 30;
  spec.beta0.assign(30, 0.0);
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);

  spec = base_spec(40, 3);
  spec.design = DesignKind::student;
  spec.student_df = 8;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);

  spec = base_spec(40, 3);
  spec.misspec = MisspecKind::quadratic;
  spec.quad_index = 0;
  spec.design = DesignKind::student;
  spec.student_df = 12;
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);

  spec = base_spec(40, 3);
  spec.noise = NoiseKind::heteroskedastic;
  spec.gamma = {1.0};
  CHECK_THROWS_AS(spec.validate(), InvalidSpec);
}

TEST_CASE("dgp generation is deterministic in the seed") {
  const DgpSpec spec = base_spec(50, 3);
  const RegressionSample a = dgp_generate(spec);
  const RegressionSample b = dgp_generate(spec);
  CHECK(max_abs_diff(a.x, b.x) == 0.0);
  for (std::size_t i = 0; i < a.n(); ++i) CHECK(a.y[i] == b.y[i]);

  DgpSpec other = spec;
  other.seed = 43;
  const RegressionSample c = dgp_generate(other);
  CHECK(max_abs_diff(a.x, c.x) > 0.0);
}

TEST_CASE("noiseless data reproduces beta0 exactly") {
  DgpSpec spec = base_spec(60, 4);
  spec.sigma = 0.0;
  const RegressionSample s = dgp_generate(spec);
  const Vector fit = least_squares(s);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(std::abs(fit[j] - spec.beta0[j]) <= 1e-10);
  }
}

TEST_CASE("quadratic misspecification keeps the projection parameter at beta0") {
  DgpSpec spec = base_spec(1000000, 3);
  spec.misspec = MisspecKind::quadratic;
  spec.quad_index = 1;
  spec.seed = 7;
  const RegressionSample s = dgp_generate(spec);
  const Vector fit = least_squares(s);
  // Sandwich s.e. per coordinate is at most sqrt(11/n) here; allow 3 s.e.
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(fit[j] - spec.beta0[j]) <= 0.01);
  }
}

TEST_CASE("heteroskedastic noise keeps the projection parameter at beta0") {
  DgpSpec spec = base_spec(1000000, 3);
  spec.noise = NoiseKind::heteroskedastic;
  spec.gamma = {0.5, 0.0, 0.0};
  spec.seed = 8;
  const RegressionSample s = dgp_generate(spec);
  const Vector fit = least_squares(s);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(fit[j] - spec.beta0[j]) <= 0.01);
  }
}

TEST_CASE("student designs are scaled to unit variance") {
  DgpSpec spec = base_spec(200000, 1);
  spec.design = DesignKind::student;
  spec.student_df = 9;
  spec.seed = 9;
  const RegressionSample s = dgp_generate(spec);
  double sumsq = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) sumsq += s.x(i, 0) * s.x(i, 0);
  CHECK(sumsq / static_cast<double>(s.n()) == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("population keys separate population changes and ignore n and seed") {
  const DgpSpec spec = base_spec(100, 3);
  DgpSpec same = spec;
  same.n_total = 400;
  same.seed = 77;
  CHECK(spec.population_key() == same.population_key());
  DgpSpec different = spec;
  different.beta0[0] += 0.5;
  CHECK(spec.population_key() != different.population_key());
}

TEST_CASE("oracle cache round trip and reuse") {
  TempCacheDir tmp("selfnorm_test_cache");
  OracleCache cache(tmp.path);
  const DgpSpec spec = base_spec(100, 2);
  const Matrix first = oracle_sandwich(spec, &cache, 20000);
  CHECK(std::filesystem::exists(tmp.path));
  const Matrix second = oracle_sandwich(spec, &cache, 20000);
  CHECK(max_abs_diff(first, second) == 0.0);
  // Homoskedastic unit noise with identity design: V is close to sigma^2 I.
  CHECK(first(0, 0) == Catch::Approx(1.0).margin(0.1));
  CHECK(first(0, 1) == Catch::Approx(0.0).margin(0.1));
}

TEST_CASE("plugin correlation at the oracle sample reproduces the oracle") {
  const DgpSpec spec = base_spec(20000, 2);
  TempCacheDir tmp("selfnorm_test_cache2");
  OracleCache cache(tmp.path);
  const CorrelationMatrix oracle = oracle_correlation(spec, &cache, 20000);
  DgpSpec same = spec;
  same.seed = detail::oracle_seed(spec);
  const RegressionSample s = dgp_generate(same);
  const CorrelationMatrix gamma = plugin_correlation(linreg_psi(s, spec.beta0));
  CHECK(max_abs_diff(gamma.entries(), oracle.entries()) <= 1e-12);
}

TEST_CASE("well-specified gaussian coverage sits near the nominal level") {
  DgpSpec spec = base_spec(400, 5);
  CoverageOptions opt;
  opt.alpha = 0.1;
  opt.reps = 400;
  opt.base_seed = 404;
  opt.threads = 4;
  const CoverageReport report = run_coverage(spec, CoverageMethod::lin, opt);
  CHECK(report.failures == 0);
  CHECK(report.coverage >= 0.87);
  CHECK(report.coverage <= 1.0);
}

TEST_CASE("one-dimensional interval length matches the closed form") {
  // At p = 1 the inverted set is an interval of length close to
  // 2 khat / sqrt(n) for a unit-variance design with unit noise.
  DgpSpec spec = base_spec(400, 1);
  GridOptions opt;
  opt.alpha = 0.1;
  opt.reps = 100;
  opt.base_seed = 33;
  opt.threads = 2;
  opt.probe.random_directions = 0;
  opt.probe.tol = 1e-5;
  const WidthReport report = run_width_scaling(spec, {400}, CoverageMethod::lin, opt);
  REQUIRE(report.rows[0].failures == 0);
  const double closed_form = 2.0 * report.rows[0].median_khat / std::sqrt(200.0);
  const double ratio = report.rows[0].median_diam2 / closed_form;
  CHECK(ratio >= 0.92);
  CHECK(ratio <= 1.10);
}

TEST_CASE("heavy-tailed student designs still cover near the nominal level") {
  DgpSpec spec = base_spec(300, 3);
  spec.design = DesignKind::student;
  spec.student_df = 9;
  spec.noise = NoiseKind::heteroskedastic;
  spec.gamma = {0.5, 0.0, 0.0};
  CoverageOptions opt;
  opt.alpha = 0.1;
  opt.reps = 200;
  opt.base_seed = 902;
  opt.threads = 2;
  for (auto method : {CoverageMethod::lin, CoverageMethod::reclin}) {
    const CoverageReport report = run_coverage(spec, method, opt);
    CHECK(report.failures == 0);
    CHECK(report.coverage >= 0.85);
  }
}

TEST_CASE("coverage with a single replication is zero or one") {
  const DgpSpec spec = base_spec(60, 2);
  CoverageOptions opt;
  opt.alpha = 0.1;
  opt.reps = 1;
  opt.base_seed = 5;
  const CoverageReport report = run_coverage(spec, CoverageMethod::lin, opt);
  CHECK(report.reps == 1);
  CHECK((report.coverage == 0.0 || report.coverage == 1.0));
}

TEST_CASE("a nominal level close to one collapses coverage") {
  const DgpSpec spec = base_spec(80, 2);
  CoverageOptions opt;
  opt.alpha = 0.99;
  opt.reps = 60;
  opt.base_seed = 6;
  const CoverageReport report = run_coverage(spec, CoverageMethod::lin, opt);
  CHECK(report.coverage <= 0.2);
}

TEST_CASE("coverage reports are deterministic and thread-invariant") {
  const DgpSpec spec = base_spec(80, 3);
  CoverageOptions opt;
  opt.alpha = 0.1;
  opt.reps = 24;
  opt.base_seed = 7;
  opt.threads = 1;
  const CoverageReport a = run_coverage(spec, CoverageMethod::reclin, opt);
  opt.threads = 4;
  const CoverageReport b = run_coverage(spec, CoverageMethod::reclin, opt);
  CHECK(a.hits == b.hits);
  CHECK(a.misses == b.misses);
  CHECK(a.failures == b.failures);
  CHECK(a.mean_khat == b.mean_khat);
  REQUIRE(a.outcomes.size() == b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    CHECK(a.outcomes[i].khat == b.outcomes[i].khat);
    CHECK(a.outcomes[i].hit == b.outcomes[i].hit);
    CHECK(a.outcomes[i].seed == b.outcomes[i].seed);
  }
}

TEST_CASE("failure accounting excludes and logs failed replications") {
  auto outcomes = detail::run_replications(10, 99, 3, [](ReplicationOutcome& out) {
    if (out.rep % 2 == 0) throw Error("injected failure");
    out.hit = out.rep % 3 != 0;
  });
  std::size_t hits = 0, misses = 0, failures = 0;
  for (const auto& out : outcomes) {
    if (out.failed) {
      ++failures;
      CHECK(out.error == "injected failure");
    } else if (out.hit) {
      ++hits;
    } else {
      ++misses;
    }
  }
  CHECK(hits + misses + failures == 10);
  CHECK(failures == 5);
}

TEST_CASE("wald coverage methods run against the oracle cache") {
  TempCacheDir tmp("selfnorm_test_cache3");
  OracleCache cache(tmp.path);
  const DgpSpec spec = base_spec(120, 2);
  CoverageOptions opt;
  opt.alpha = 0.1;
  opt.reps = 40;
  opt.base_seed = 11;
  opt.threads = 2;
  const CoverageReport plug = run_coverage(spec, CoverageMethod::wald_plugin, opt, &cache);
  const CoverageReport oracle = run_coverage(spec, CoverageMethod::wald_oracle, opt, &cache);
  CHECK(plug.failures == 0);
  CHECK(oracle.failures == 0);
  // Gaussian design, homoskedastic noise, n = 120: both should cover most of
  // the time at the 0.1 level.
  CHECK(plug.coverage >= 0.7);
  CHECK(oracle.coverage >= 0.7);
}

TEST_CASE("width scaling shrinks with n") {
  DgpSpec spec = base_spec(100, 1);
  GridOptions opt;
  opt.alpha = 0.2;
  opt.reps = 20;
  opt.base_seed = 13;
  opt.threads = 4;
  opt.probe.random_directions = 4;
  opt.probe.tol = 1e-4;
  const WidthReport report = run_width_scaling(spec, {50, 200}, CoverageMethod::lin, opt);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].median_diam2 > report.rows[1].median_diam2);
  // Quadrupling n roughly halves the width.
  CHECK(report.rows[1].ratio_vs_prev == Catch::Approx(2.0).margin(1.0));
}

TEST_CASE("near-noiseless widths sit near the tolerance floor") {
  DgpSpec spec = base_spec(100, 2);
  spec.sigma = 1e-9;
  GridOptions opt;
  opt.alpha = 0.1;
  opt.reps = 5;
  opt.base_seed = 14;
  opt.probe.random_directions = 2;
  opt.probe.tol = 1e-4;
  const WidthReport report = run_width_scaling(spec, {100}, CoverageMethod::lin, opt);
  CHECK(report.rows[0].median_diam2 <= 1e-5);
}

TEST_CASE("concentration deviations shrink at the root-n rate") {
  TempCacheDir tmp("selfnorm_test_cache4");
  OracleCache cache(tmp.path);
  DgpSpec spec = base_spec(100, 3);
  GridOptions opt;
  opt.reps = 60;
  opt.base_seed = 15;
  opt.threads = 4;
  const ConcentrationReport report =
      run_concentration(spec, {200, 3200}, opt, &cache, 200000);
  REQUIRE(report.rows.size() == 2);
  // n grows by 16, so the median deviation should shrink by about 4.
  const double ratio = report.rows[0].median_deviation / report.rows[1].median_deviation;
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 8.0);
}

TEST_CASE("concentration at p = 1 is identically zero") {
  DgpSpec spec = base_spec(100, 1);
  GridOptions opt;
  opt.reps = 5;
  opt.base_seed = 16;
  TempCacheDir tmp("selfnorm_test_cache5");
  OracleCache cache(tmp.path);
  const ConcentrationReport report = run_concentration(spec, {100}, opt, &cache, 10000);
  CHECK(report.rows[0].median_deviation == 0.0);
}

TEST_CASE("hausdorff similarity against the oracle rectangle at p = 1") {
  TempCacheDir tmp("selfnorm_test_cache6");
  OracleCache cache(tmp.path);
  DgpSpec spec = base_spec(200, 1);
  GridOptions opt;
  opt.alpha = 0.1;
  opt.reps = 6;
  opt.base_seed = 17;
  opt.threads = 2;
  opt.probe.random_directions = 8;
  opt.probe.tol = 1e-5;
  const HausdorffReport report = run_hausdorff_similarity(spec, {200}, opt, &cache);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].failures == 0);
  CHECK(report.rows[0].median_d2 >= 0.0);
  CHECK(std::isfinite(report.rows[0].ratio));

  // Closed-form cross-check at p = 1: the distance between the probed
  // interval and the rectangle interval, from the recorded cells.
  for (const auto& cell : report.cells) {
    if (cell.outcome.failed) continue;
    CHECK(cell.outcome.diam2 <= cell.diam2_waldo + 1.0);  // sane scale
  }
}

TEST_CASE("one-dimensional hausdorff matches the interval closed form") {
  TempCacheDir tmp("selfnorm_test_cache7");
  OracleCache cache(tmp.path);
  DgpSpec spec = base_spec(300, 1);
  spec.seed = 1234;
  const Matrix vstar = oracle_sandwich(spec, &cache, 200000);
  const RegressionSample sample = dgp_generate(spec);
  const CalibratedSet set = calibrate_reclin(sample, 0.1, 2000, 99);
  const WaldOracleInputs oracle{Matrix::identity(1), vstar};
  const CalibratedSet waldo = calibrate_wald(*set.analysis, set.khat.khat, oracle);

  auto inside = [&](double b) { return member_reclin(set, Vector{b}); };
  auto exit_from = [&](double dir) {
    double lo = 0.0, hi = 1e-3;
    while (inside(set.analysis_center[0] + dir * hi)) {
      lo = hi;
      hi *= 2.0;
      REQUIRE(hi < 100.0);
    }
    while (hi - lo > 1e-8) {
      const double mid = 0.5 * (lo + hi);
      (inside(set.analysis_center[0] + dir * mid) ? lo : hi) = mid;
    }
    return set.analysis_center[0] + dir * lo;
  };
  const double a1 = exit_from(-1.0);
  const double a2 = exit_from(1.0);
  const double b1 = (*waldo.wald_center)[0] - (*waldo.wald_halfwidths)[0];
  const double b2 = (*waldo.wald_center)[0] + (*waldo.wald_halfwidths)[0];
  auto dist_point = [](double x, double lo, double hi) {
    return std::max({lo - x, x - hi, 0.0});
  };
  const double closed_form =
      std::max(std::max(dist_point(a1, b1, b2), dist_point(a2, b1, b2)),
               std::max(dist_point(b1, a1, a2), dist_point(b2, a1, a2)));

  ProbeOptions probe;
  probe.random_directions = 4;
  probe.tol = 1e-7;
  probe.seed = 5;
  const double estimated = hausdorff_member_rect(
      [&](const Vector& b) { return member_reclin(set, b); }, set.analysis_center,
      *waldo.wald_center, *waldo.wald_halfwidths, probe);
  CHECK(estimated == Catch::Approx(closed_form).margin(1e-5));
}
