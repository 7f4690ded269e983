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

#include "usdf/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "mc_tables.hpp"

namespace usdf {
namespace {

using mc_tables::kCornerOffset;
using mc_tables::kEdgeCorners;
using mc_tables::kTriTable;

static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");

void check_grid(const GridView& g) {
  if (g.resolution < 2) throw UsageError("marching_cubes: resolution must be >= 2");
  const std::size_t n = static_cast<std::size_t>(g.resolution) * g.resolution * g.resolution;
  if (g.values.size() != n) {
    throw DimensionError("marching_cubes: expected " + std::to_string(n) + " values, got " +
                         std::to_string(g.values.size()));
  }
  if (!(g.spacing > 0.0)) throw UsageError("marching_cubes: spacing must be positive");
  for (double v : g.values) {
    if (!std::isfinite(v)) throw NumericError("marching_cubes: non-finite grid value");
  }
}

int edge_axis(int e) {
  const auto& a = kCornerOffset[kEdgeCorners[e][0]];
  const auto& b = kCornerOffset[kEdgeCorners[e][1]];
  for (int d = 0; d < 3; ++d) {
    if (a[d] != b[d]) return d;
  }
  return -1;
}

const std::array<int, 12> kEdgeAxis = [] {
  std::array<int, 12> axes{};
  for (int e = 0; e < 12; ++e) axes[e] = edge_axis(e);
  return axes;
}();

// Drops vertices no triangle references, keeping the remaining order.
void compact(TriMesh& mesh) {
  std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
  for (const auto& t : mesh.triangles) {
    for (auto v : t) remap[v] = 0;
  }
  std::int32_t next = 0;
  std::vector<Vec3> kept;
  kept.reserve(mesh.vertices.size());
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] == 0) {
      remap[i] = next++;
      kept.push_back(mesh.vertices[i]);
    }
  }
  if (kept.size() == mesh.vertices.size()) return;
  for (auto& t : mesh.triangles) {
    for (auto& v : t) v = remap[v];
  }
  mesh.vertices = std::move(kept);
}

}  // namespace

GridView unit_grid(std::span<const double> values, int resolution) {
  if (resolution < 2) throw UsageError("unit_grid: resolution must be >= 2");
  return {values, resolution, -0.5, 1.0 / (resolution - 1)};
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

TriMesh marching_cubes(const GridView& g, double iso) {
  check_grid(g);
  const int r = g.resolution;
  const std::size_t plane = static_cast<std::size_t>(r) * r;
  auto point_index = [&](int i, int j, int k) {
    return static_cast<std::size_t>(k) * plane + static_cast<std::size_t>(j) * r + i;
  };
  auto inside = [&](int i, int j, int k) { return g.at(i, j, k) < iso; };

  // Pass 1: one vertex per lattice edge whose endpoints straddle iso, numbered
  // slab by slab so the order does not depend on scheduling.
  std::vector<std::int32_t> edge_vertex(3 * plane * r, -1);
  std::vector<std::size_t> slab_count(static_cast<std::size_t>(r) + 1, 0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < r; ++k) {
    std::size_t count = 0;
    for (int j = 0; j < r; ++j) {
      for (int i = 0; i < r; ++i) {
        const bool s = inside(i, j, k);
        if (i + 1 < r && inside(i + 1, j, k) != s) ++count;
        if (j + 1 < r && inside(i, j + 1, k) != s) ++count;
        if (k + 1 < r && inside(i, j, k + 1) != s) ++count;
      }
    }
    slab_count[static_cast<std::size_t>(k) + 1] = count;
  }
  for (int k = 0; k < r; ++k) slab_count[k + 1] += slab_count[k];

  TriMesh mesh;
  mesh.vertices.resize(slab_count[r]);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < r; ++k) {
    std::size_t next = slab_count[k];
    for (int j = 0; j < r; ++j) {
      for (int i = 0; i < r; ++i) {
        const double v0 = g.at(i, j, k);
        const bool s = v0 < iso;
        const Vec3 p0 = g.point(i, j, k);
        const int nb[3][3] = {{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}};
        for (int a = 0; a < 3; ++a) {
          const int ni = nb[a][0], nj = nb[a][1], nk = nb[a][2];
          if (ni >= r || nj >= r || nk >= r) continue;
          const double v1 = g.at(ni, nj, nk);
          if ((v1 < iso) == s) continue;
          const double t = (iso - v0) / (v1 - v0);
          mesh.vertices[next] = p0 + t * (g.point(ni, nj, nk) - p0);
          edge_vertex[3 * point_index(i, j, k) + a] = static_cast<std::int32_t>(next);
          ++next;
        }
      }
    }
  }

  // Pass 2: triangles, emitted per slab of cells and concatenated in slab order.
  const int cells = r - 1;
  std::vector<std::vector<Triangle>> slab_tris(static_cast<std::size_t>(cells));
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < cells; ++k) {
    auto& out = slab_tris[k];
    for (int j = 0; j < cells; ++j) {
      for (int i = 0; i < cells; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = kCornerOffset[c];
          if (inside(i + o[0], j + o[1], k + o[2])) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        const auto& row = kTriTable[cube];
        for (int t = 0; row[t] != -1; t += 3) {
          Triangle tri{};
          for (int m = 0; m < 3; ++m) {
            const int e = row[t + m];
            const auto& o = kCornerOffset[kEdgeCorners[e][0]];
            tri[m] = edge_vertex[3 * point_index(i + o[0], j + o[1], k + o[2]) + kEdgeAxis[e]];
          }
          // The table winds counter-clockwise seen from the inside; flip.
          std::swap(tri[1], tri[2]);
          if (triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) <=
              1e-12) {
            continue;
          }
          out.push_back(tri);
        }
      }
    }
  }
  std::size_t total = 0;
  for (const auto& s : slab_tris) total += s.size();
  mesh.triangles.reserve(total);
  for (const auto& s : slab_tris) mesh.triangles.insert(mesh.triangles.end(), s.begin(), s.end());
  compact(mesh);
  return mesh;
}

double surface_area(const TriMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }
  return area;
}

void validate(const TriMesh& mesh) {
  const auto n = static_cast<std::int64_t>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (auto v : t) {
      if (v < 0 || v >= n) throw DataError("mesh: triangle index out of range");
    }
  }
}

void validate(const UncertainMesh& mesh) {
  validate(TriMesh{mesh.vertices, mesh.triangles});
  if (mesh.vertex_sigma.size() != mesh.vertices.size()) {
    throw DataError("mesh: vertex_sigma length differs from vertex count");
  }
  for (double s : mesh.vertex_sigma) {
    if (!(s >= 0.0)) throw DataError("mesh: vertex_sigma must be non-negative");
  }
}

UncertainMesh attach_uncertainty(const TriMesh& mesh, const LatentField& field,
                                 const LatentGaussian& latent, int samples, std::uint64_t seed) {
  validate(mesh);
  UncertainMesh out{mesh.vertices, mesh.triangles, {}};
  if (mesh.vertices.empty()) return out;
  out.vertex_sigma = propagate_vertices(field, latent, mesh.vertices, samples, seed);
  return out;
}

std::vector<double> relative_uncertainty(std::span<const double> sigma) {
  std::vector<double> rel(sigma.size(), 0.0);
  if (sigma.empty()) return rel;
  const auto [lo, hi] = std::minmax_element(sigma.begin(), sigma.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return rel;
  for (std::size_t i = 0; i < sigma.size(); ++i) rel[i] = (sigma[i] - *lo) / range;
  return rel;
}

std::array<std::uint8_t, 3> uncertainty_color(double relative) {
  const double u = std::clamp(relative, 0.0, 1.0);
  auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
  return {byte(u), byte(1.0 - std::abs(2.0 * u - 1.0)), byte(1.0 - u)};
}

void write_ply(std::ostream& out, const UncertainMesh& mesh) {
  validate(mesh);
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "comment usdf uncertainty mesh\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double uncertainty\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  const auto rel = relative_uncertainty(mesh.vertex_sigma);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const double rec[4] = {mesh.vertices[i].x(), mesh.vertices[i].y(), mesh.vertices[i].z(),
                           mesh.vertex_sigma[i]};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    const auto rgb = uncertainty_color(rel[i]);
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t three = 3;
    out.put(static_cast<char>(three));
    out.write(reinterpret_cast<const char*>(t.data()), sizeof(std::int32_t) * 3);
  }
}

void export_ply(const std::filesystem::path& path, const UncertainMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_ply(out, mesh);
  out.flush();
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

int type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw DataError("ply: unknown property type '" + t + "'");
}

double read_scalar(std::istream& in, const std::string& t) {
  char buf[8];
  in.read(buf, type_size(t));
  if (!in) throw DataError("ply: truncated body");
  auto as = [&](auto v) {
    std::memcpy(&v, buf, sizeof(v));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return as(std::int8_t{});
  if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
  if (t == "short" || t == "int16") return as(std::int16_t{});
  if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
  if (t == "int" || t == "int32") return as(std::int32_t{});
  if (t == "uint" || t == "uint32") return as(std::uint32_t{});
  if (t == "float" || t == "float32") return as(float{});
  return as(double{});
}

}  // namespace

UncertainMesh read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw DataError("ply: missing magic");
  std::vector<PlyElement> elements;
  bool binary_le = false;
  while (true) {
    if (!std::getline(in, line)) throw DataError("ply: header ended early");
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      if (!ls) throw DataError("ply: bad element line '" + line + "'");
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw DataError("ply: property before element");
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type;
      }
      ls >> p.name;
      if (!ls) throw DataError("ply: bad property line '" + line + "'");
      type_size(p.type);
      if (p.is_list) type_size(p.count_type);
      elements.back().props.push_back(p);
    }
  }
  if (!binary_le) throw DataError("ply: only binary_little_endian is supported");

  UncertainMesh mesh;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      mesh.vertices.resize(e.count);
      mesh.vertex_sigma.assign(e.count, 0.0);
    }
    for (std::size_t r = 0; r < e.count; ++r) {
      for (const auto& p : e.props) {
        if (p.is_list) {
          const auto n = static_cast<std::size_t>(read_scalar(in, p.count_type));
          std::vector<double> items(n);
          for (auto& v : items) v = read_scalar(in, p.type);
          if (e.name == "face" && p.name == "vertex_indices") {
            if (n != 3) throw DataError("ply: only triangular faces are supported");
            mesh.triangles.push_back({static_cast<std::int32_t>(items[0]),
                                      static_cast<std::int32_t>(items[1]),
                                      static_cast<std::int32_t>(items[2])});
          }
          continue;
        }
        const double v = read_scalar(in, p.type);
        if (e.name != "vertex") continue;
        if (p.name == "x") mesh.vertices[r].x() = v;
        else if (p.name == "y") mesh.vertices[r].y() = v;
        else if (p.name == "z") mesh.vertices[r].z() = v;
        else if (p.name == "uncertainty") mesh.vertex_sigma[r] = v;
      }
    }
  }
  validate(mesh);
  return mesh;
}

UncertainMesh import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  try {
    return read_ply(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void export_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  validate(mesh);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace usdf
