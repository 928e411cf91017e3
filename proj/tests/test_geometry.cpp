#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "selfnorm/confset.hpp"
#include "selfnorm/estimating.hpp"
#include "selfnorm/geometry.hpp"
#include "selfnorm/selfnorm.hpp"
#include "test_support.hpp"

using namespace selfnorm;

namespace {

MembershipOracle rect_oracle(Vector center, Vector half) {
  return [center = std::move(center), half = std::move(half)](const Vector& beta) {
    for (std::size_t j = 0; j < beta.size(); ++j) {
      if (std::abs(beta[j] - center[j]) > half[j]) return false;
    }
    return true;
  };
}

}  // namespace

TEST_CASE("axis probes recover rectangle widths") {
  const Vector center{0.4, -0.2, 1.0};
  const Vector half{0.5, 1.25, 0.75};
  ProbeOptions opt;
  opt.random_directions = 0;
  opt.tol = 1e-6;
  opt.t_max = 10.0;
  const auto summary = diameter_estimate(rect_oracle(center, half), center, opt);
  CHECK(summary.diam_inf == Catch::Approx(2.5).margin(1e-5));
  // Axes only: the longest axis chord.
  CHECK(summary.diam2 == Catch::Approx(2.5).margin(1e-5));
  CHECK(summary.directions_used == 6);
  REQUIRE(summary.exits.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(summary.exits[j].t_plus == Catch::Approx(half[j]).margin(1e-5));
    CHECK(summary.exits[j].t_minus == Catch::Approx(half[j]).margin(1e-5));
  }
}

TEST_CASE("a probe from an off-center member still spans full widths") {
  const Vector center{0.0, 0.0};
  const Vector half{1.0, 2.0};
  const Vector start{0.6, -1.1};
  ProbeOptions opt;
  opt.random_directions = 0;
  opt.tol = 1e-6;
  const auto summary = diameter_estimate(rect_oracle(center, half), start, opt);
  CHECK(summary.diam_inf == Catch::Approx(4.0).margin(1e-5));
}

TEST_CASE("dense direction sampling approaches the exact corner diameter") {
  const Vector center{0.0, 0.0};
  const Vector half{1.0, 0.7};
  const double exact = 2.0 * norm2(half);
  ProbeOptions opt;
  opt.random_directions = 2000;
  opt.tol = 1e-6;
  opt.seed = 11;
  const auto summary = diameter_estimate(rect_oracle(center, half), center, opt);
  CHECK(summary.diam2 <= exact + 1e-9);
  CHECK(summary.diam2 >= 0.98 * exact);
}

TEST_CASE("euclidean balls have the right diameter in every direction") {
  const Vector center{1.0, -1.0, 0.5, 2.0};
  const double radius = 0.8;
  auto oracle = [&](const Vector& beta) { return norm2(subtract(beta, center)) <= radius; };
  ProbeOptions opt;
  opt.random_directions = 20;
  opt.tol = 1e-6;
  opt.seed = 7;
  const auto summary = diameter_estimate(oracle, center, opt);
  CHECK(summary.diam2 == Catch::Approx(2.0 * radius).margin(3e-6));
  for (const auto& exit : summary.exits) {
    CHECK(exit.t_plus == Catch::Approx(radius).margin(2e-6));
  }
}

TEST_CASE("a singleton set reports diameter at the tolerance floor") {
  const Vector center{0.25, -0.75};
  auto oracle = [&](const Vector& beta) { return beta == center; };
  ProbeOptions opt;
  opt.random_directions = 5;
  opt.tol = 1e-4;
  opt.seed = 3;
  const auto summary = diameter_estimate(oracle, center, opt);
  CHECK(summary.diam2 <= 2.0 * opt.tol);
}

TEST_CASE("the zero-noise statistic set collapses to a point") {
  // Exact-fit data: the statistic at beta0 is 0 by the zero-column
  // convention, and any khat = 0 threshold keeps only beta0.
  SplitMix64 gen(substream(601, 0));
  const std::size_t n = 30, p = 2;
  Matrix x = testsupport::random_matrix(gen, n, p, -2.0, 2.0);
  const Vector beta0{1.0, -0.5};
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) y[i] += x(i, j) * beta0[j];
  }
  const RegressionSample s(std::move(x), std::move(y));
  auto oracle = [&](const Vector& beta) {
    return self_normalized_stat(linreg_psi(s, beta)).value <= 0.0;
  };
  REQUIRE(oracle(beta0));
  ProbeOptions opt;
  opt.random_directions = 8;
  opt.tol = 1e-5;
  opt.seed = 5;
  const auto summary = diameter_estimate(oracle, beta0, opt);
  CHECK(summary.diam2 <= 2.0 * opt.tol);
}

TEST_CASE("probing rejects an outside center and unbounded sets") {
  const Vector center{0.0, 0.0};
  auto nothing = [](const Vector&) { return false; };
  CHECK_THROWS_AS(diameter_estimate(nothing, center, ProbeOptions{}), CenterOutside);
  auto everything = [](const Vector&) { return true; };
  CHECK_THROWS_AS(diameter_estimate(everything, center, ProbeOptions{}), Unbounded);
}

TEST_CASE("norm inequality between the diameter estimates holds on tilted sets") {
  // Elongated tilted ellipse: chords along random directions dominate the
  // axis chords, which is exactly the case the max-norm chord bound covers.
  const Vector center{0.0, 0.0};
  auto oracle = [&](const Vector& beta) {
    const double u = (beta[0] + beta[1]) / std::sqrt(2.0);
    const double v = (beta[0] - beta[1]) / std::sqrt(2.0);
    return (u * u) / 25.0 + (v * v) / 0.01 <= 1.0;
  };
  ProbeOptions opt;
  opt.random_directions = 300;
  opt.tol = 1e-6;
  opt.t_max = 100.0;
  opt.seed = 13;
  const auto summary = diameter_estimate(oracle, center, opt);
  CHECK(summary.diam2 <= std::sqrt(2.0) * summary.diam_inf + 1e-9);
  CHECK(summary.diam2 >= 9.0);  // the long chord was actually found
}

TEST_CASE("rectangle hausdorff distances on trivial cases") {
  const auto same = hausdorff_rect_rect(Vector{1.0, 2.0}, Vector{1.0, 2.0}, Vector{0.0, 0.0});
  CHECK(same.first == 0.0);
  CHECK(same.second == 0.0);

  const auto scalar = hausdorff_rect_rect(Vector{2.0}, Vector{1.0}, Vector{0.0});
  CHECK(scalar.first == 1.0);
  CHECK(scalar.second == 1.0);
}

TEST_CASE("common-center hausdorff matches the componentwise closed form") {
  SplitMix64 gen(substream(602, 0));
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t p = 1 + static_cast<std::size_t>(gen.next_bounded(6));
    Vector a(p), b(p);
    for (std::size_t j = 0; j < p; ++j) {
      a[j] = testsupport::uniform_range(gen, 0.0, 2.0);
      b[j] = testsupport::uniform_range(gen, 0.0, 2.0);
    }
    const auto [d2, dinf] = hausdorff_rect_rect(a, b, Vector(p, 0.0));
    double ab = 0.0, ba = 0.0, abi = 0.0, bai = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      ab += std::pow(std::max(a[j] - b[j], 0.0), 2);
      ba += std::pow(std::max(b[j] - a[j], 0.0), 2);
      abi = std::max(abi, a[j] - b[j]);
      bai = std::max(bai, b[j] - a[j]);
    }
    CHECK(d2 == Catch::Approx(std::max(std::sqrt(ab), std::sqrt(ba))).margin(1e-12));
    CHECK(dinf == Catch::Approx(std::max({abi, bai, 0.0})).margin(1e-12));
  }
}

TEST_CASE("offset hausdorff matches a dense boundary-grid oracle") {
  SplitMix64 gen(substream(603, 0));
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t p = 3;
    Vector a(p), b(p), offset(p);
    for (std::size_t j = 0; j < p; ++j) {
      a[j] = testsupport::uniform_range(gen, 0.3, 1.5);
      b[j] = testsupport::uniform_range(gen, 0.3, 1.5);
      offset[j] = testsupport::uniform_range(gen, -1.0, 1.0);
    }
    const auto [d2, dinf] = hausdorff_rect_rect(a, b, offset);

    // Oracle: directed sup over a dense grid on each closed face (corners
    // included), distance by clamping.
    auto directed = [&](const Vector& from_c, const Vector& from_h, const Vector& to_c,
                        const Vector& to_h) {
      double worst = 0.0;
      const int grid = 24;
      for (std::size_t fixed = 0; fixed < p; ++fixed) {
        for (int side = 0; side < 2; ++side) {
          for (int g1 = 0; g1 <= grid; ++g1) {
            for (int g2 = 0; g2 <= grid; ++g2) {
              Vector point(p);
              point[fixed] = from_c[fixed] + (side ? from_h[fixed] : -from_h[fixed]);
              const std::size_t j1 = (fixed + 1) % p;
              const std::size_t j2 = (fixed + 2) % p;
              point[j1] = from_c[j1] + (-1.0 + 2.0 * g1 / grid) * from_h[j1];
              point[j2] = from_c[j2] + (-1.0 + 2.0 * g2 / grid) * from_h[j2];
              double dist = 0.0;
              for (std::size_t j = 0; j < p; ++j) {
                const double r = std::max(std::abs(point[j] - to_c[j]) - to_h[j], 0.0);
                dist += r * r;
              }
              worst = std::max(worst, std::sqrt(dist));
            }
          }
        }
      }
      return worst;
    };
    const Vector origin(p, 0.0);
    const double oracle = std::max(directed(origin, a, offset, b), directed(offset, b, origin, a));
    CHECK(d2 == Catch::Approx(oracle).margin(1e-3));
    CHECK(d2 >= oracle - 1e-12);  // grid points are feasible, so oracle <= exact
  }
}

TEST_CASE("directed rectangle distances satisfy the triangle inequality") {
  SplitMix64 gen(substream(604, 0));
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 1 + static_cast<std::size_t>(gen.next_bounded(5));
    auto rand_rect = [&](Vector& c, Vector& h) {
      c.resize(p);
      h.resize(p);
      for (std::size_t j = 0; j < p; ++j) {
        c[j] = testsupport::uniform_range(gen, -1.0, 1.0);
        h[j] = testsupport::uniform_range(gen, 0.05, 1.5);
      }
    };
    Vector ca, ha, cb, hb, cc, hc;
    rand_rect(ca, ha);
    rand_rect(cb, hb);
    rand_rect(cc, hc);
    const double ab = detail::rect_to_rect_directed(ca, ha, cb, hb).first;
    const double bc = detail::rect_to_rect_directed(cb, hb, cc, hc).first;
    const double ac = detail::rect_to_rect_directed(ca, ha, cc, hc).first;
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("hausdorff probe of a rectangle against itself is zero") {
  const Vector center{0.5, -0.5, 1.0};
  const Vector half{0.8, 1.1, 0.6};
  ProbeOptions opt;
  opt.random_directions = 40;
  opt.tol = 1e-5;
  opt.seed = 21;
  const double d = hausdorff_member_rect(rect_oracle(center, half), center, center, half, opt);
  CHECK(d <= 5e-5);
}

TEST_CASE("hausdorff probe against a doubled rectangle matches the exact formula") {
  const Vector center{0.0, 0.0, 0.0};
  const Vector half{0.6, 0.9, 0.3};
  Vector doubled(half);
  for (double& h : doubled) h *= 2.0;
  ProbeOptions opt;
  opt.random_directions = 100;
  opt.tol = 1e-6;
  opt.seed = 22;
  const double d = hausdorff_member_rect(rect_oracle(center, half), center, center, doubled, opt);
  const auto exact = hausdorff_rect_rect(half, doubled, Vector{0.0, 0.0, 0.0});
  CHECK(d == Catch::Approx(exact.first).margin(1e-4));
}

TEST_CASE("hausdorff probe rejects an outside center") {
  auto nothing = [](const Vector&) { return false; };
  CHECK_THROWS_AS(
      hausdorff_member_rect(nothing, Vector{0.0}, Vector{0.0}, Vector{1.0}, ProbeOptions{}),
      CenterOutside);
}

TEST_CASE("probe rejects dimension mismatches and negative halfwidths") {
  CHECK_THROWS_AS(hausdorff_rect_rect(Vector{1.0}, Vector{1.0, 2.0}, Vector{0.0}),
                  DimensionMismatch);
  CHECK_THROWS_AS(hausdorff_rect_rect(Vector{-1.0}, Vector{1.0}, Vector{0.0}), OutOfRange);
  const Vector big(25, 1.0);
  Vector offset(25, 0.0);
  offset[0] = 0.5;
  CHECK_THROWS_AS(hausdorff_rect_rect(big, big, offset), DimensionExceeded);
}
