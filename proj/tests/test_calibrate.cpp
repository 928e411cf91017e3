#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "selfnorm/calibrate.hpp"
#include "test_support.hpp"

using namespace selfnorm;
using testsupport::quantile_oracle;

TEST_CASE("bonferroni quantile against the oracle") {
  CHECK(std::abs(bonferroni_quantile(0.05, 1).khat - 1.9599639845400542) <= 1e-9);
  CHECK(std::abs(bonferroni_quantile(0.05, 10).khat - 2.8070337683438041) <= 1e-9);
  CHECK(std::abs(bonferroni_quantile(0.05, 10).khat - quantile_oracle(1.0 - 0.05 / 20.0)) <= 1e-9);
}

TEST_CASE("bonferroni quantile decreases in alpha") {
  CHECK(bonferroni_quantile(0.2, 5).khat < bonferroni_quantile(0.1, 5).khat);
  CHECK(bonferroni_quantile(0.5, 5).khat < bonferroni_quantile(0.2, 5).khat);
}

TEST_CASE("sidak quantile against the oracle") {
  // p = 1 coincides with Bonferroni.
  CHECK(sidak_quantile(0.05, 1).khat == bonferroni_quantile(0.05, 1).khat);
  // Direct evaluation of Phi^{-1}((1 + (1-alpha)^{1/p}) / 2).
  CHECK(std::abs(sidak_quantile(0.05, 10).khat - 2.7996252193010964) <= 1e-9);
  const double arg = 0.5 * (1.0 + std::pow(0.95, 0.1));
  CHECK(std::abs(sidak_quantile(0.05, 10).khat - quantile_oracle(arg)) <= 1e-9);
  CHECK(std::abs(sidak_quantile(0.05, 20).khat - 3.0159945334899400) <= 1e-9);
}

TEST_CASE("sidak never exceeds bonferroni") {
  SplitMix64 gen(substream(404, 0));
  for (int rep = 0; rep < 200; ++rep) {
    const double alpha = testsupport::uniform_range(gen, 0.001, 0.5);
    const std::size_t p = 1 + static_cast<std::size_t>(gen.next_bounded(200));
    CHECK(sidak_quantile(alpha, p).khat <= bonferroni_quantile(alpha, p).khat);
  }
}

TEST_CASE("quantile requests validate alpha and p") {
  CHECK_THROWS_AS(bonferroni_quantile(0.0, 3), OutOfRange);
  CHECK_THROWS_AS(bonferroni_quantile(1.0, 3), OutOfRange);
  CHECK_THROWS_AS(sidak_quantile(-0.1, 3), OutOfRange);
  CHECK_THROWS_AS(sidak_quantile(0.1, 0), OutOfRange);
}

TEST_CASE("empirical quantile of an injected multiset") {
  const std::vector<double> stats{1.0, 2.0, 3.0, 4.0, 5.0};
  // At t = 4 exactly one of five values exceeds t (fraction 0.2 <= alpha);
  // below 4 the fraction is 0.4.
  CHECK(max_stat_quantile(stats, 0.2) == 4.0);
  CHECK(max_stat_quantile(stats, 0.5) == 3.0);
  CHECK(max_stat_quantile(stats, 0.9) == 1.0);
}

TEST_CASE("empirical quantile is the infimum of the exceedance condition") {
  SplitMix64 gen(substream(405, 0));
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t b = 1 + static_cast<std::size_t>(gen.next_bounded(40));
    std::vector<double> stats(b);
    for (double& s : stats) s = testsupport::uniform_range(gen, 0.0, 10.0);
    const double alpha = testsupport::uniform_range(gen, 0.01, 0.99);
    const double k = max_stat_quantile(stats, alpha);

    auto exceed_fraction = [&](double t) {
      std::size_t count = 0;
      for (double s : stats) count += s > t ? 1 : 0;
      return static_cast<double>(count) / static_cast<double>(b);
    };
    CHECK(exceed_fraction(k) <= alpha);
    // No sampled value below k satisfies the condition.
    for (double s : stats) {
      if (s < k) CHECK(exceed_fraction(s) > alpha);
    }
  }
}

TEST_CASE("bootstrap quantile for a single coordinate approximates the normal quantile") {
  const auto q = bootstrap_quantile(CorrelationMatrix::identity(1), 0.05, 200000, 77);
  CHECK(std::abs(q.khat - 1.9599639845400542) <= 0.02);
  CHECK(q.b_used == 200000);
  CHECK(q.seed_used == 77);
}

TEST_CASE("perfectly correlated coordinates behave like a single one") {
  Matrix ones(10, 10, 1.0);
  const auto q = bootstrap_quantile(CorrelationMatrix(ones), 0.05, 200000, 78);
  CHECK(std::abs(q.khat - 1.9599639845400542) <= 0.02);
}

TEST_CASE("independent coordinates reproduce the sidak quantile") {
  const auto q = bootstrap_quantile(CorrelationMatrix::identity(20), 0.05, 200000, 79);
  CHECK(std::abs(q.khat - sidak_quantile(0.05, 20).khat) <= 0.03);
}

TEST_CASE("bootstrap quantile is reproducible across thread counts") {
  SplitMix64 gen(substream(406, 0));
  const PsiMatrix psi{testsupport::random_matrix(gen, 40, 5, -1.0, 1.0)};
  const auto gamma = plugin_correlation(psi);
  const double k1 = bootstrap_quantile(gamma, 0.1, 5000, 123, 1).khat;
  const double k4 = bootstrap_quantile(gamma, 0.1, 5000, 123, 4).khat;
  const double k8 = bootstrap_quantile(gamma, 0.1, 5000, 123, 8).khat;
  CHECK(k1 == k4);
  CHECK(k1 == k8);
}

TEST_CASE("bootstrap quantile is nonincreasing in alpha for a shared seed") {
  SplitMix64 gen(substream(407, 0));
  const PsiMatrix psi{testsupport::random_matrix(gen, 30, 4, -1.0, 1.0)};
  const auto gamma = plugin_correlation(psi);
  double prev = bootstrap_quantile(gamma, 0.02, 4000, 5).khat;
  for (double alpha : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double k = bootstrap_quantile(gamma, alpha, 4000, 5).khat;
    CHECK(k <= prev);
    prev = k;
  }
}

TEST_CASE("bootstrap quantile is an element of the sampled maxima") {
  SplitMix64 gen(substream(408, 0));
  const PsiMatrix psi{testsupport::random_matrix(gen, 25, 3, -1.0, 1.0)};
  const auto gamma = plugin_correlation(psi);
  const auto stats = bootstrap_max_stats(gamma, 500, 99);
  const double k = bootstrap_quantile(gamma, 0.1, 500, 99).khat;
  CHECK(std::find(stats.begin(), stats.end(), k) != stats.end());
}

TEST_CASE("bootstrap rejects invalid requests") {
  CHECK_THROWS_AS(bootstrap_quantile(CorrelationMatrix::identity(2), 1.5, 100, 1), OutOfRange);
  CHECK_THROWS_AS(bootstrap_quantile(CorrelationMatrix::identity(2), 0.1, 0, 1), OutOfRange);
}
