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

#include "usdf/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace usdf {
namespace {

// Scaled p-norm of three non-negative values; avoids overflow for large exponents.
double pnorm3(double x, double y, double z, double power) {
  const double m = std::max({x, y, z});
  if (m == 0.0) return 0.0;
  if (std::isinf(power)) return m;
  // Ratios below 1e-12 contribute nothing at double precision (power >= 1) and
  // would push pow onto its slow subnormal path.
  auto term = [power](double r) { return r < 1e-12 ? 0.0 : std::pow(r, power); };
  const double s = term(x / m) + term(y / m) + term(z / m);
  return m * std::pow(s, 1.0 / power);
}

double dual_exponent(double e) {
  if (e <= 1.0) return std::numeric_limits<double>::infinity();
  return e / (e - 1.0);
}

bool is_sphere(const ShapeSpec& s) {
  return s.exponent == 2.0 && s.half_extents[0] == s.half_extents[1] &&
         s.half_extents[1] == s.half_extents[2];
}

// max over unit n in the positive octant of n.q - h(n), q >= 0 componentwise.
double support_gap_max(const ShapeSpec& spec, const Vec3& q) {
  const double dual = dual_exponent(spec.exponent);
  const auto& a = spec.half_extents;
  auto objective = [&](double theta, double phi) {
    const double st = std::sin(theta);
    const double nx = st * std::cos(phi);
    const double ny = st * std::sin(phi);
    const double nz = std::cos(theta);
    const double h = pnorm3(a[0] * nx, a[1] * ny, a[2] * nz, dual);
    return nx * q.x() + ny * q.y() + nz * q.z() - h;
  };
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  constexpr int kGrid = 9;
  double best = -std::numeric_limits<double>::infinity();
  double bt = 0.0;
  double bp = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double t = kHalfPi * i / (kGrid - 1);
      const double p = kHalfPi * j / (kGrid - 1);
      const double v = objective(t, p);
      if (v > best) {
        best = v;
        bt = t;
        bp = p;
      }
    }
  }
  double step = kHalfPi / (kGrid - 1);
  constexpr int kDirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  const double max_step = step;
  for (int iter = 0; iter < 400 && step > 1e-10; ++iter) {
    bool moved = false;
    for (const auto& d : kDirs) {
      const double t = std::clamp(bt + d[0] * step, 0.0, kHalfPi);
      const double p = std::clamp(bp + d[1] * step, 0.0, kHalfPi);
      const double v = objective(t, p);
      if (v > best) {
        best = v;
        bt = t;
        bp = p;
        moved = true;
      }
    }
    step = moved ? std::min(2.0 * step, max_step) : 0.5 * step;
  }
  return best;
}

}  // namespace

void validate(const ShapeSpec& spec) {
  for (double h : spec.half_extents) {
    if (!(h > 0.0 && h <= 0.5)) throw UsageError("ShapeSpec: half extents must lie in (0, 0.5]");
  }
  if (!(spec.exponent >= 1.0 && spec.exponent <= 8.0)) {
    throw UsageError("ShapeSpec: exponent must lie in [1, 8]");
  }
}

ShapeSpec make_sphere(double radius, int instance_id) {
  ShapeSpec s;
  s.half_extents = {radius, radius, radius};
  s.exponent = 2.0;
  s.instance_id = instance_id;
  return s;
}

double gauge(const ShapeSpec& spec, const Vec3& p) {
  const auto& a = spec.half_extents;
  return pnorm3(std::abs(p.x()) / a[0], std::abs(p.y()) / a[1], std::abs(p.z()) / a[2],
                spec.exponent);
}

double support(const ShapeSpec& spec, const Vec3& n) {
  const auto& a = spec.half_extents;
  return pnorm3(std::abs(a[0] * n.x()), std::abs(a[1] * n.y()), std::abs(a[2] * n.z()),
                dual_exponent(spec.exponent));
}

double conservative_sdf(const ShapeSpec& spec, const Vec3& p) {
  const double min_extent = std::min({spec.half_extents[0], spec.half_extents[1], spec.half_extents[2]});
  return (gauge(spec, p) - 1.0) * min_extent;
}

Vec3 radial_surface_point(const ShapeSpec& spec, const Vec3& dir) {
  const double g = gauge(spec, dir);
  if (g == 0.0) throw UsageError("radial_surface_point: zero direction");
  return dir / g;
}

double analytic_sdf(const ShapeSpec& spec, const Vec3& p) {
  if (is_sphere(spec)) return p.norm() - spec.half_extents[0];

  const double g = gauge(spec, p);
  const double lower = conservative_sdf(spec, p);  // |lower| <= |sdf|, same sign
  const double dual_max = support_gap_max(spec, p.cwiseAbs());  // <= sdf
  if (g == 0.0) return std::min(dual_max, lower);
  const double radial = p.norm() * std::abs(1.0 - 1.0 / g);  // >= |sdf|
  if (g >= 1.0) return std::min(std::max(dual_max, lower), radial);
  return std::min(std::max(dual_max, -radial), lower);
}

std::vector<SdfSample> sample_training_points(const ShapeSpec& spec, int n_surface,
                                              int n_uniform, double surface_noise_sigma,
                                              std::uint64_t seed) {
  if (n_surface < 0 || n_uniform < 0) throw UsageError("sample_training_points: negative count");
  if (surface_noise_sigma < 0.0) throw UsageError("sample_training_points: negative noise");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  std::vector<SdfSample> out;
  out.reserve(static_cast<std::size_t>(n_surface + n_uniform));
  for (int i = 0; i < n_surface; ++i) {
    Vec3 dir;
    do {
      dir = Vec3(normal(rng), normal(rng), normal(rng));
    } while (dir.squaredNorm() < 1e-12);
    Vec3 p = radial_surface_point(spec, dir);
    if (surface_noise_sigma > 0.0) {
      p += surface_noise_sigma * Vec3(normal(rng), normal(rng), normal(rng));
    }
    out.push_back({p, analytic_sdf(spec, p)});
  }
  for (int i = 0; i < n_uniform; ++i) {
    const Vec3 p(uniform(rng), uniform(rng), uniform(rng));
    out.push_back({p, analytic_sdf(spec, p)});
  }
  return out;
}

std::vector<ShapeSpec> make_family(int count, std::uint64_t seed, const FamilyRanges& ranges) {
  if (count < 1) throw UsageError("make_family: count must be >= 1");
  std::mt19937_64 rng(derive_seed(seed, "shape_family"));
  std::uniform_real_distribution<double> extent(ranges.min_half_extent, ranges.max_half_extent);
  std::uniform_real_distribution<double> exponent(ranges.min_exponent, ranges.max_exponent);
  std::vector<ShapeSpec> family;
  for (int i = 0; i < count; ++i) {
    ShapeSpec s;
    s.half_extents = {extent(rng), extent(rng), extent(rng)};
    s.exponent = exponent(rng);
    s.instance_id = i;
    validate(s);
    family.push_back(s);
  }
  return family;
}

FamilySplit split_family(const std::vector<ShapeSpec>& family, int heldout_count) {
  if (heldout_count < 0 || heldout_count >= static_cast<int>(family.size())) {
    throw UsageError("split_family: held-out count must leave at least one training shape");
  }
  std::vector<ShapeSpec> sorted = family;
  std::sort(sorted.begin(), sorted.end(),
            [](const ShapeSpec& a, const ShapeSpec& b) { return a.instance_id < b.instance_id; });
  FamilySplit split;
  const std::size_t n_train = sorted.size() - static_cast<std::size_t>(heldout_count);
  split.train.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.heldout.assign(sorted.begin() + static_cast<std::ptrdiff_t>(n_train), sorted.end());
  return split;
}

void write_family_manifest(std::ostream& out, const std::vector<ShapeSpec>& family) {
  out << "# instance_id family half_x half_y half_z exponent\n";
  out << std::setprecision(17);
  for (const auto& s : family) {
    out << s.instance_id << " superellipsoid " << s.half_extents[0] << ' ' << s.half_extents[1]
        << ' ' << s.half_extents[2] << ' ' << s.exponent << '\n';
  }
}

std::vector<ShapeSpec> read_family_manifest(std::istream& in) {
  std::vector<ShapeSpec> family;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ShapeSpec s;
    std::string fam;
    is >> s.instance_id >> fam >> s.half_extents[0] >> s.half_extents[1] >> s.half_extents[2] >>
        s.exponent;
    if (!is || fam != "superellipsoid") {
      throw DataError("family manifest line " + std::to_string(line_no) + " is malformed");
    }
    family.push_back(s);
  }
  return family;
}

void save_family_manifest(const std::filesystem::path& path, const std::vector<ShapeSpec>& family) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_family_manifest(out, family);
}

std::vector<ShapeSpec> load_family_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return read_family_manifest(in);
}

const ShapeSpec& find_shape(const std::vector<ShapeSpec>& family, int instance_id) {
  for (const auto& s : family)
    if (s.instance_id == instance_id) return s;
  throw DataError("no shape with instance id " + std::to_string(instance_id));
}

}  // namespace usdf
