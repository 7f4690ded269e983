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

#pragma once

// Procedural superellipsoid family: ground-truth SDFs, decoder training samples,
// and the family manifest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "usdf/common.hpp"

namespace usdf {

enum class ShapeFamily { superellipsoid };

/// Superellipsoid |x/a|^e + |y/b|^e + |z/c|^e <= 1, centred at the origin.
/// Half extents lie in (0, 0.5] so the shape fits the unit cube [-0.5, 0.5]^3.
struct ShapeSpec {
  ShapeFamily family = ShapeFamily::superellipsoid;
  std::array<double, 3> half_extents{0.3, 0.3, 0.3};
  double exponent = 2.0;  // in [1, 8]; convex for every admissible value
  int instance_id = 0;

  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

/// Throws UsageError when a spec violates the containment / exponent ranges.
void validate(const ShapeSpec& spec);

ShapeSpec make_sphere(double radius, int instance_id = 0);

/// Gauge function (|x/a|^e + |y/b|^e + |z/c|^e)^(1/e); 1 on the surface,
/// positively homogeneous of degree one.
double gauge(const ShapeSpec& spec, const Vec3& p);

/// Support function of the solid in direction n (dual norm of the gauge).
double support(const ShapeSpec& spec, const Vec3& n);

/// Euclidean signed distance to the surface, negative inside.
///
/// For a convex solid K the signed distance equals max over unit n of
/// (n.p - h_K(n)). The maximisation runs over one octant after reflecting p,
/// by coarse grid search followed by compass refinement. The result is then
/// clamped between two closed-form bounds: the Lipschitz-1 scaled gauge
/// (|value| never exceeds the true distance) and the distance to the radial
/// surface point p / gauge(p) (never below it). Exact for spheres.
double analytic_sdf(const ShapeSpec& spec, const Vec3& p);

/// (gauge(p) - 1) * min(half_extents). Lipschitz-1, same sign as the SDF and
/// never larger in magnitude, so it is a safe sphere-tracing step.
double conservative_sdf(const ShapeSpec& spec, const Vec3& p);

/// Surface point along direction `dir` from the origin.
Vec3 radial_surface_point(const ShapeSpec& spec, const Vec3& dir);

struct SdfSample {
  Vec3 point;
  double sdf = 0.0;
};

/// `n_surface` points at surface + N(0, noise^2 I) offsets (surface points are
/// radial projections of uniformly random directions) and `n_uniform` points
/// uniform in [-0.5, 0.5]^3, all labelled with analytic_sdf.
std::vector<SdfSample> sample_training_points(const ShapeSpec& spec, int n_surface,
                                              int n_uniform, double surface_noise_sigma,
                                              std::uint64_t seed);

struct FamilyRanges {
  double min_half_extent = 0.15;
  double max_half_extent = 0.38;
  double min_exponent = 2.0;
  double max_exponent = 6.0;
};

/// Deterministic family with instance ids 0..count-1.
std::vector<ShapeSpec> make_family(int count, std::uint64_t seed, const FamilyRanges& ranges = {});

struct FamilySplit {
  std::vector<ShapeSpec> train;
  std::vector<ShapeSpec> heldout;
};

/// The `heldout_count` highest instance ids are held out.
FamilySplit split_family(const std::vector<ShapeSpec>& family, int heldout_count);

void write_family_manifest(std::ostream& out, const std::vector<ShapeSpec>& family);
std::vector<ShapeSpec> read_family_manifest(std::istream& in);
void save_family_manifest(const std::filesystem::path& path, const std::vector<ShapeSpec>& family);
std::vector<ShapeSpec> load_family_manifest(const std::filesystem::path& path);

const ShapeSpec& find_shape(const std::vector<ShapeSpec>& family, int instance_id);

}  // namespace usdf
