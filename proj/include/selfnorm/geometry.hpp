#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "selfnorm/matrix.hpp"
#include "selfnorm/rng.hpp"

namespace selfnorm {

using MembershipOracle = std::function<bool(const Vector&)>;

struct ProbeOptions {
  std::size_t random_directions = 50;
  double tol = 1e-4;
  double t_max = 50.0;
  std::uint64_t seed = 0;
};

struct DirectionExit {
  Vector direction;
  double t_plus = 0.0;
  double t_minus = 0.0;
};

struct GeometrySummary {
  double diam2 = 0.0;
  double diam_inf = 0.0;
  std::size_t directions_used = 0;
  std::vector<DirectionExit> exits;
};

namespace detail {

inline std::string direction_repr(const Vector& v) {
  std::string out = "(";
  char buf[24];
  for (std::size_t j = 0; j < v.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.3g", v[j]);
    if (j) out += ", ";
    out += buf;
  }
  return out + ")";
}

// First radius along v at which membership flips, by bracket doubling then
// bisection. Returns the last inside radius, so chord lengths built from it
// are lower bounds.
inline double first_exit(const MembershipOracle& member, const Vector& center,
                         const Vector& v, const ProbeOptions& opt) {
  Vector probe(center.size());
  auto inside = [&](double t) {
    for (std::size_t j = 0; j < center.size(); ++j) probe[j] = center[j] + t * v[j];
    return member(probe);
  };
  double lo = 0.0;
  double hi = 1e-3 * opt.t_max;
  while (inside(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > opt.t_max) {
      throw Unbounded("diameter probe: no exit before t_max along direction " +
                      direction_repr(v));
    }
  }
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    if (inside(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

inline Vector random_unit_direction(SplitMix64& gen, std::size_t p) {
  Vector v(p);
  double norm = 0.0;
  do {
    for (std::size_t j = 0; j < p; ++j) v[j] = gen.next_normal();
    norm = norm2(v);
  } while (norm == 0.0);
  for (std::size_t j = 0; j < p; ++j) v[j] /= norm;
  return v;
}

}  // namespace detail

// Direction-sampled lower bound on the diameters of an implicit set, probed
// along the 2p signed axes plus seeded random unit directions. diam2 is the
// longest probed chord; diam_inf is the longest chord measured in the max
// norm (on axis-aligned rectangles this reduces to the axis probes), which
// keeps diam2 <= sqrt(p) * diam_inf valid for tilted sets as well.
inline GeometrySummary diameter_estimate(const MembershipOracle& member, const Vector& center,
                                         const ProbeOptions& opt = {}) {
  if (!member(center)) throw CenterOutside("diameter probe: center is not a member");
  const std::size_t p = center.size();

  std::vector<Vector> directions;
  directions.reserve(p + opt.random_directions);
  for (std::size_t j = 0; j < p; ++j) {
    Vector axis(p, 0.0);
    axis[j] = 1.0;
    directions.push_back(std::move(axis));
  }
  SplitMix64 gen = substream(opt.seed, 0x9e0);
  for (std::size_t k = 0; k < opt.random_directions; ++k) {
    directions.push_back(detail::random_unit_direction(gen, p));
  }

  GeometrySummary summary;
  summary.directions_used = 2 * directions.size();
  summary.exits.reserve(directions.size());
  for (const Vector& v : directions) {
    Vector neg = scaled(v, -1.0);
    DirectionExit exit;
    exit.direction = v;
    exit.t_plus = detail::first_exit(member, center, v, opt);
    exit.t_minus = detail::first_exit(member, center, neg, opt);
    const double chord = exit.t_plus + exit.t_minus;
    summary.diam2 = std::max(summary.diam2, chord);
    summary.diam_inf = std::max(summary.diam_inf, chord * norm_inf(v));
    summary.exits.push_back(std::move(exit));
  }
  return summary;
}

namespace detail {

// Distance from a point to an axis-aligned rectangle, by clamping.
inline double point_rect_dist2(const Vector& point, const Vector& rect_center,
                               const Vector& rect_half) {
  double s = 0.0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    const double r = std::max(std::abs(point[j] - rect_center[j]) - rect_half[j], 0.0);
    s += r * r;
  }
  return std::sqrt(s);
}

inline double point_rect_dist_inf(const Vector& point, const Vector& rect_center,
                                  const Vector& rect_half) {
  double m = 0.0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    m = std::max(m, std::abs(point[j] - rect_center[j]) - rect_half[j]);
  }
  return std::max(m, 0.0);
}

// Directed Hausdorff from rectangle A to rectangle B. The point-to-rectangle
// distance is convex, so the supremum over A sits at a corner of A.
inline std::pair<double, double> rect_to_rect_directed(const Vector& a_center,
                                                       const Vector& a_half,
                                                       const Vector& b_center,
                                                       const Vector& b_half) {
  const std::size_t p = a_half.size();
  double d2 = 0.0;
  double dinf = 0.0;
  Vector corner(p);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
    for (std::size_t j = 0; j < p; ++j) {
      corner[j] = a_center[j] + ((mask >> j) & 1 ? a_half[j] : -a_half[j]);
    }
    d2 = std::max(d2, point_rect_dist2(corner, b_center, b_half));
    dinf = std::max(dinf, point_rect_dist_inf(corner, b_center, b_half));
  }
  return {d2, dinf};
}

}  // namespace detail

// Exact Hausdorff distances (Euclidean, max-norm) between the rectangle with
// half-widths a centered at the origin and the rectangle with half-widths b
// centered at center_offset. Shared centers use the closed form
// d2(A->B) = ||(a-b)_+||_2; offset centers enumerate corners, for p <= 20.
inline std::pair<double, double> hausdorff_rect_rect(const Vector& a_half, const Vector& b_half,
                                                     const Vector& center_offset) {
  const std::size_t p = a_half.size();
  if (b_half.size() != p || center_offset.size() != p) {
    throw DimensionMismatch("hausdorff_rect_rect: length mismatch");
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (a_half[j] < 0.0 || b_half[j] < 0.0) {
      throw OutOfRange("hausdorff_rect_rect: negative halfwidth");
    }
  }
  const bool common_center =
      std::all_of(center_offset.begin(), center_offset.end(), [](double c) { return c == 0.0; });
  if (common_center) {
    double ab2 = 0.0, ba2 = 0.0, abi = 0.0, bai = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double ab = std::max(a_half[j] - b_half[j], 0.0);
      const double ba = std::max(b_half[j] - a_half[j], 0.0);
      ab2 += ab * ab;
      ba2 += ba * ba;
      abi = std::max(abi, ab);
      bai = std::max(bai, ba);
    }
    return {std::max(std::sqrt(ab2), std::sqrt(ba2)), std::max(abi, bai)};
  }
  if (p > 20) {
    throw DimensionExceeded("hausdorff_rect_rect: exact corner enumeration limited to p <= 20");
  }
  const Vector origin(p, 0.0);
  const auto [ab2, abi] = detail::rect_to_rect_directed(origin, a_half, center_offset, b_half);
  const auto [ba2, bai] = detail::rect_to_rect_directed(center_offset, b_half, origin, a_half);
  return {std::max(ab2, ba2), std::max(abi, bai)};
}

// Sampled two-sided Euclidean Hausdorff distance between an implicit
// star-shaped set (membership oracle with an interior center) and an explicit
// rectangle. Implicit-set boundary points come from first-exit probes;
// rectangle boundary points are corners (p <= 12) plus seeded face samples.
// Distances from rectangle points to the implicit set follow the ray toward
// the center. The result is a sampled estimate, reported as a lower bound of
// the true Hausdorff distance.
inline double hausdorff_member_rect(const MembershipOracle& member, const Vector& center,
                                    const Vector& rect_center, const Vector& rect_half,
                                    const ProbeOptions& opt = {}) {
  if (!member(center)) throw CenterOutside("hausdorff probe: center is not a member");
  const std::size_t p = center.size();
  if (rect_center.size() != p || rect_half.size() != p) {
    throw DimensionMismatch("hausdorff probe: length mismatch");
  }

  // Implicit boundary -> rectangle.
  double d_set_to_rect = 0.0;
  {
    std::vector<Vector> directions;
    for (std::size_t j = 0; j < p; ++j) {
      Vector axis(p, 0.0);
      axis[j] = 1.0;
      directions.push_back(axis);
      directions.push_back(scaled(axis, -1.0));
    }
    SplitMix64 gen = substream(opt.seed, 0x9e1);
    for (std::size_t k = 0; k < opt.random_directions; ++k) {
      directions.push_back(detail::random_unit_direction(gen, p));
    }
    Vector point(p);
    for (const Vector& v : directions) {
      const double t = detail::first_exit(member, center, v, opt);
      for (std::size_t j = 0; j < p; ++j) point[j] = center[j] + t * v[j];
      d_set_to_rect =
          std::max(d_set_to_rect, detail::point_rect_dist2(point, rect_center, rect_half));
    }
  }

  // Rectangle boundary -> implicit set.
  double d_rect_to_set = 0.0;
  {
    std::vector<Vector> points;
    if (p <= 12) {
      Vector corner(p);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
        for (std::size_t j = 0; j < p; ++j) {
          corner[j] = rect_center[j] + ((mask >> j) & 1 ? rect_half[j] : -rect_half[j]);
        }
        points.push_back(corner);
      }
    }
    SplitMix64 gen = substream(opt.seed, 0x9e2);
    for (std::size_t k = 0; k < opt.random_directions; ++k) {
      Vector face(p);
      for (std::size_t j = 0; j < p; ++j) {
        face[j] = rect_center[j] + (2.0 * gen.next_uniform() - 1.0) * rect_half[j];
      }
      const std::size_t j = static_cast<std::size_t>(gen.next_bounded(p));
      face[j] = rect_center[j] + (gen.next() & 1 ? rect_half[j] : -rect_half[j]);
      points.push_back(std::move(face));
    }

    Vector probe(p);
    for (const Vector& y : points) {
      if (member(y)) continue;
      // Bisect the segment from the center (inside) to y (outside).
      double lo = 0.0, hi = 1.0;
      const double seg_len = norm2(subtract(y, center));
      if (seg_len == 0.0) continue;
      while ((hi - lo) * seg_len > opt.tol) {
        const double mid = 0.5 * (lo + hi);
        for (std::size_t j = 0; j < p; ++j) probe[j] = center[j] + mid * (y[j] - center[j]);
        if (member(probe)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      d_rect_to_set = std::max(d_rect_to_set, (1.0 - lo) * seg_len);
    }
  }

  return std::max(d_set_to_rect, d_rect_to_set);
}

}  // namespace selfnorm
