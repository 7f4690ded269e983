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

#include "reference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <unordered_map>

#include "mc_tables.hpp"
#include "ray_cast.hpp"

namespace usdf::reference {

TriMesh marching_cubes_serial(const GridView& g, double iso) {
  using namespace mc_tables;
  const int r = g.resolution;
  TriMesh mesh;
  std::unordered_map<std::int64_t, std::int32_t> cache;
  for (int k = 0; k + 1 < r; ++k) {
    for (int j = 0; j + 1 < r; ++j) {
      for (int i = 0; i + 1 < r; ++i) {
        double val[8];
        Vec3 pos[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const auto& o = kCornerOffset[c];
          val[c] = g.at(i + o[0], j + o[1], k + o[2]);
          pos[c] = g.point(i + o[0], j + o[1], k + o[2]);
          if (val[c] < iso) cube |= 1 << c;
        }
        const auto& row = kTriTable[cube];
        for (int t = 0; row[t] != -1; t += 3) {
          Triangle tri{};
          for (int m = 0; m < 3; ++m) {
            const int e = row[t + m];
            const int c0 = kEdgeCorners[e][0];
            const int c1 = kEdgeCorners[e][1];
            const auto& o0 = kCornerOffset[c0];
            const auto& o1 = kCornerOffset[c1];
            const std::int64_t p0 = (static_cast<std::int64_t>(k + o0[2]) * r + j + o0[1]) * r + i + o0[0];
            const std::int64_t p1 = (static_cast<std::int64_t>(k + o1[2]) * r + j + o1[1]) * r + i + o1[0];
            const std::int64_t key = p0 * 8 + (p1 - p0 == 1 ? 0 : p1 - p0 == r ? 1 : 2);
            auto it = cache.find(key);
            if (it == cache.end()) {
              const double t01 = (iso - val[c0]) / (val[c1] - val[c0]);
              mesh.vertices.push_back(pos[c0] + t01 * (pos[c1] - pos[c0]));
              it = cache.emplace(key, static_cast<std::int32_t>(mesh.vertices.size() - 1)).first;
            }
            tri[m] = it->second;
          }
          std::swap(tri[1], tri[2]);
          if (triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) > 1e-12) {
            mesh.triangles.push_back(tri);
          }
        }
      }
    }
  }
  return mesh;
}

VoxelGrid32 voxelize_brute_force(const TriMesh& mesh) {
  constexpr int n = VoxelGrid32::kResolution;
  const double h = 1.0 / n;
  VoxelGrid32 grid;
  grid.source = VoxelSource::from_mesh;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int idx[3] = {i, j, k};
        int votes = 0;
        for (int axis = 0; axis < 3; ++axis) {
          int u = 0;
          int v = 0;
          ray_cast::plane_axes(axis, u, v);
          const double pu = VoxelGrid32::center(idx[u]) + kRayJitterU * h;
          const double pv = VoxelGrid32::center(idx[v]) + kRayJitterV * h;
          const double c = VoxelGrid32::center(idx[axis]);
          int above = 0;
          for (const auto& tri : mesh.triangles) {
            double height = 0.0;
            if (ray_cast::crosses(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]],
                                  axis, pu, pv, height) &&
                height > c) {
              ++above;
            }
          }
          votes += above % 2;
        }
        grid.occupancy[VoxelGrid32::index(i, j, k)] = votes >= 2 ? 1 : 0;
      }
    }
  }
  return grid;
}

namespace {

struct KdNode {
  int point = -1;
  int axis = 0;
  std::unique_ptr<KdNode> left, right;
};

std::unique_ptr<KdNode> build(std::span<const Vec3> pts, std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return nullptr;
  const int axis = depth % 3;
  const int mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) { return pts[a][axis] < pts[b][axis]; });
  auto node = std::make_unique<KdNode>();
  node->point = idx[mid];
  node->axis = axis;
  node->left = build(pts, idx, lo, mid, depth + 1);
  node->right = build(pts, idx, mid + 1, hi, depth + 1);
  return node;
}

void nearest(const KdNode* node, std::span<const Vec3> pts, const Vec3& q, double& best) {
  if (!node) return;
  const double d = (pts[node->point] - q).squaredNorm();
  best = std::min(best, d);
  const double diff = q[node->axis] - pts[node->point][node->axis];
  const KdNode* near = diff < 0 ? node->left.get() : node->right.get();
  const KdNode* far = diff < 0 ? node->right.get() : node->left.get();
  nearest(near, pts, q, best);
  if (diff * diff < best) nearest(far, pts, q, best);
}

double one_sided(std::span<const Vec3> from, std::span<const Vec3> to) {
  std::vector<int> idx(to.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto root = build(to, idx, 0, static_cast<int>(to.size()), 0);
  double total = 0.0;
  for (const auto& q : from) {
    double best = std::numeric_limits<double>::infinity();
    nearest(root.get(), to, q, best);
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double chamfer_kdtree(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw UsageError("chamfer_kdtree: point sets must be nonempty");
  return one_sided(a, b) + one_sided(b, a);
}

double emd_brute_force(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw UsageError("emd_brute_force: sizes differ");
  if (a.size() > 8) throw UsageError("emd_brute_force: at most 8 points");
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += (a[i] - b[perm[i]]).norm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

PointMoments propagate_points_two_pass(const LatentField& field, const LatentGaussian& latent,
                                       std::span<const Vec3> points, int samples,
                                       std::uint64_t seed) {
  if (samples < 2) throw UsageError("propagate_points_two_pass: need at least two samples");
  const auto codes = sample_codes(latent, samples, seed);
  std::vector<std::vector<double>> values(codes.size(), std::vector<double>(points.size()));
  for (std::size_t m = 0; m < codes.size(); ++m) field.decode(codes[m], points, values[m]);
  PointMoments out;
  out.mean.assign(points.size(), 0.0);
  out.var.assign(points.size(), 0.0);
  for (const auto& row : values)
    for (std::size_t i = 0; i < points.size(); ++i) out.mean[i] += row[i];
  for (double& m : out.mean) m /= samples;
  for (const auto& row : values)
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = row[i] - out.mean[i];
      out.var[i] += d * d;
    }
  for (double& v : out.var) v /= samples - 1;
  return out;
}

LatentGaussian fuse_dense(std::span<const LatentGaussian> observations) {
  if (observations.empty()) throw UsageError("fuse_dense: no observations");
  const auto dim = static_cast<Eigen::Index>(observations.front().dim());
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(dim);
  for (const auto& g : observations) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index d = 0; d < dim; ++d) cov(d, d) = std::max(g.var[d], kFusionVarFloor);
    const Eigen::MatrixXd prec = cov.inverse();
    info += prec;
    eta += prec * Eigen::Map<const Eigen::VectorXd>(g.mean.data(), dim);
  }
  const Eigen::MatrixXd cov = info.inverse();
  const Eigen::VectorXd mu = cov * eta;
  LatentGaussian out;
  out.mean.assign(mu.data(), mu.data() + dim);
  out.var.resize(dim);
  for (Eigen::Index d = 0; d < dim; ++d) out.var[d] = cov(d, d);
  return out;
}

}  // namespace usdf::reference
