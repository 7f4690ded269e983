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

// Iso-surface extraction and mesh I/O with a per-vertex uncertainty channel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "usdf/propagation.hpp"

namespace usdf {

using Triangle = std::array<std::int32_t, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

struct UncertainMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<double> vertex_sigma;
};

/// Scalar field on the lattice origin + spacing * (i, j, k), x fastest.
struct GridView {
  std::span<const double> values;
  int resolution = 0;
  double origin = -0.5;
  double spacing = 0.0;

  Vec3 point(int i, int j, int k) const {
    return {origin + i * spacing, origin + j * spacing, origin + k * spacing};
  }
  double at(int i, int j, int k) const {
    return values[(static_cast<std::size_t>(k) * resolution + j) * resolution + i];
  }
};

/// Unit-cube lattice with spacing 1/(R-1), as produced by propagate_grid.
GridView unit_grid(std::span<const double> values, int resolution);

/// Marching cubes with the classic 256-case table. A corner is "inside" when its
/// value is below iso; triangles wind counter-clockwise seen from outside.
/// Vertices sit on lattice edges, shared between neighbouring cells, and are
/// numbered by (base lattice point, axis). Triangles with area <= 1e-12 are
/// dropped. A field that never crosses iso gives an empty mesh.
TriMesh marching_cubes(const GridView& grid, double iso = 0.0);

double surface_area(const TriMesh& mesh);
double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
void validate(const TriMesh& mesh);
void validate(const UncertainMesh& mesh);

/// Decorates mesh vertices with the Monte-Carlo SDF standard deviation.
UncertainMesh attach_uncertainty(const TriMesh& mesh, const LatentField& field,
                                 const LatentGaussian& latent, int samples, std::uint64_t seed);

/// Per-mesh min-max normalised sigma in [0, 1]; all zeros when sigma is constant.
std::vector<double> relative_uncertainty(std::span<const double> sigma);
/// Blue (low) to red (high) ramp.
std::array<std::uint8_t, 3> uncertainty_color(double relative);

/// Binary little-endian PLY. Vertex properties: double x y z, double
/// uncertainty, uchar red green blue. Faces: list uchar int vertex_indices.
void write_ply(std::ostream& out, const UncertainMesh& mesh);
void export_ply(const std::filesystem::path& path, const UncertainMesh& mesh);
UncertainMesh read_ply(std::istream& in);
UncertainMesh import_ply(const std::filesystem::path& path);

/// Geometry only.
void export_obj(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace usdf
