// Copyright 2026 The usdf Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "usdf/shapes.hpp"

using namespace usdf;

namespace {

double implicit_value(const ShapeSpec& s, const Vec3& p) {
  double v = 0.0;
  for (int i = 0; i < 3; ++i) v += std::pow(std::abs(p[i]) / s.half_extents[i], s.exponent);
  return v - 1.0;
}

Vec3 random_point(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  return {u(rng), u(rng), u(rng)};
}

// Radial projections of a fine grid on the faces of a cube.
std::vector<Vec3> dense_surface(const ShapeSpec& s, int per_side) {
  std::vector<Vec3> pts;
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {-1, 1}) {
      for (int a = 0; a < per_side; ++a) {
        for (int b = 0; b < per_side; ++b) {
          Vec3 d;
          d[axis] = sign;
          d[(axis + 1) % 3] = -1.0 + 2.0 * (a + 0.5) / per_side;
          d[(axis + 2) % 3] = -1.0 + 2.0 * (b + 0.5) / per_side;
          pts.push_back(radial_surface_point(s, d));
        }
      }
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("sphere distances are exact") {
  const ShapeSpec s = make_sphere(0.3);
  CHECK(std::abs(analytic_sdf(s, Vec3(0, 0, 0)) + 0.3) < 1e-12);
  CHECK(std::abs(analytic_sdf(s, Vec3(0.3, 0, 0))) < 1e-12);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p = random_point(rng, 1.0);
    CHECK(std::abs(analytic_sdf(s, p) - (p.norm() - 0.3)) < 1e-9);
  }
}

TEST_CASE("box-like shape agrees with a dense surface sample") {
  ShapeSpec s;
  s.half_extents = {0.3, 0.25, 0.2};
  s.exponent = 8.0;
  const auto surface = dense_surface(s, 160);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 64; ++i) {
    const Vec3 p = random_point(rng, 0.6);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : surface) best = std::min(best, (p - q).squaredNorm());
    const double brute = std::sqrt(best) * (implicit_value(s, p) < 0 ? -1.0 : 1.0);
    CAPTURE(p.transpose());
    CHECK(std::abs(analytic_sdf(s, p) - brute) < 0.02);
  }
}

TEST_CASE("sign agrees with the implicit inside test") {
  const auto family = make_family(6, 3);
  std::mt19937_64 rng(4);
  for (const auto& s : family) {
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec3 p = random_point(rng, 0.6);
      const double f = implicit_value(s, p);
      if (f == 0.0) continue;
      if ((analytic_sdf(s, p) < 0) != (f < 0)) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("gradient norm stays near one") {
  const auto family = make_family(4, 5);
  std::mt19937_64 rng(6);
  const double h = 1e-5;
  for (const auto& s : family) {
    for (int i = 0; i < 1000; ++i) {
      const Vec3 p = random_point(rng, 0.5);
      Vec3 g;
      for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        g[a] = (analytic_sdf(s, p + e) - analytic_sdf(s, p - e)) / (2 * h);
      }
      CAPTURE(p.transpose());
      CHECK(g.norm() >= 0.5);
      CHECK(g.norm() <= 1.5);
    }
  }
}

TEST_CASE("conservative distance is a same-sign lower bound") {
  const auto family = make_family(5, 9);
  std::mt19937_64 rng(10);
  for (const auto& s : family) {
    for (int i = 0; i < 500; ++i) {
      const Vec3 p = random_point(rng, 0.7);
      const double c = conservative_sdf(s, p);
      const double a = analytic_sdf(s, p);
      CHECK(std::abs(c) <= std::abs(a) + 1e-12);
      CHECK((c < 0) == (a < 0));
    }
  }
}

TEST_CASE("surface points and support function") {
  ShapeSpec s;
  s.half_extents = {0.4, 0.2, 0.3};
  s.exponent = 3.5;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Vec3 d = random_point(rng, 1.0);
    const Vec3 p = radial_surface_point(s, d);
    CHECK(std::abs(gauge(s, p) - 1.0) < 1e-12);
    CHECK(std::abs(analytic_sdf(s, p)) < 1e-9);
  }
  CHECK(std::abs(support(s, Vec3(1, 0, 0)) - 0.4) < 1e-9);
  CHECK(std::abs(support(s, Vec3(0, -1, 0)) - 0.2) < 1e-9);
  CHECK_THROWS_AS(radial_surface_point(s, Vec3::Zero()), UsageError);
}

TEST_CASE("shape parameter validation") {
  ShapeSpec s;
  CHECK_NOTHROW(validate(s));
  s.half_extents[1] = 0.6;
  CHECK_THROWS_AS(validate(s), UsageError);
  s.half_extents[1] = 0.3;
  s.exponent = 0.5;
  CHECK_THROWS_AS(validate(s), UsageError);
}

TEST_CASE("training samples") {
  const ShapeSpec sphere = make_sphere(0.3);
  SUBCASE("uniform inside fraction matches the volume ratio") {
    const int n = 10000;
    const auto pts = sample_training_points(sphere, 0, n, 0.02, 1);
    int inside = 0;
    for (const auto& p : pts) {
      CHECK(p.point.cwiseAbs().maxCoeff() <= 0.5);
      inside += p.sdf < 0;
    }
    const double expected = 4.0 / 3.0 * std::numbers::pi * 0.027;
    const double sd = std::sqrt(expected * (1 - expected) / n);
    CHECK(std::abs(inside / static_cast<double>(n) - expected) < 3 * sd);
  }
  SUBCASE("zero noise puts points on the surface") {
    ShapeSpec s;
    s.half_extents = {0.35, 0.2, 0.25};
    s.exponent = 5.0;
    for (const auto& p : sample_training_points(s, 300, 0, 0.0, 2)) CHECK(std::abs(p.sdf) < 1e-9);
  }
  SUBCASE("deterministic under a seed") {
    const auto a = sample_training_points(sphere, 50, 50, 0.02, 3);
    const auto b = sample_training_points(sphere, 50, 50, 0.02, 3);
    REQUIRE(a.size() == 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].point == b[i].point);
      CHECK(a[i].sdf == b[i].sdf);
    }
  }
  CHECK_THROWS_AS(sample_training_points(sphere, -1, 0, 0.0, 0), UsageError);
}

TEST_CASE("family construction") {
  const auto a = make_family(16, 7);
  const auto b = make_family(16, 7);
  CHECK(a == b);
  const FamilyRanges ranges;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].instance_id == static_cast<int>(i));
    CHECK_NOTHROW(validate(a[i]));
    for (double h : a[i].half_extents) {
      CHECK(h >= ranges.min_half_extent);
      CHECK(h <= ranges.max_half_extent);
    }
    CHECK(a[i].exponent >= ranges.min_exponent);
    CHECK(a[i].exponent <= ranges.max_exponent);
    for (std::size_t j = 0; j < i; ++j) {
      double d = std::abs(a[i].exponent - a[j].exponent);
      for (int k = 0; k < 3; ++k) d += std::abs(a[i].half_extents[k] - a[j].half_extents[k]);
      CHECK(d > 0.0);
    }
  }
  CHECK_FALSE(make_family(16, 8) == a);
  CHECK_THROWS_AS(make_family(0, 1), UsageError);

  const FamilySplit split = split_family(a, 4);
  CHECK(split.train.size() == 12);
  CHECK(split.heldout.size() == 4);
  CHECK(split.heldout.front().instance_id == 12);
  CHECK_THROWS_AS(split_family(a, 16), UsageError);
}

TEST_CASE("family manifest round trip") {
  const auto family = make_family(5, 1);
  std::stringstream ss;
  write_family_manifest(ss, family);
  CHECK(read_family_manifest(ss) == family);

  usdf::test::TempDir dir("shapes");
  save_family_manifest(dir / "family.txt", family);
  CHECK(load_family_manifest(dir / "family.txt") == family);
  CHECK(find_shape(family, 3).instance_id == 3);
  CHECK_THROWS_AS(find_shape(family, 99), DataError);

  std::stringstream bad("0 superellipsoid 0.1 oops\n");
  CHECK_THROWS_AS(read_family_manifest(bad), DataError);
  CHECK_THROWS_AS(load_family_manifest(dir / "missing.txt"), DataError);
}
