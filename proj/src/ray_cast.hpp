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

// Axis-aligned ray / triangle crossing shared by the voxelizers.

#include "usdf/common.hpp"

namespace usdf::ray_cast {

/// Plane axes (u, v) for rays travelling along `axis`; (u, v, axis) is right-handed.
inline void plane_axes(int axis, int& u, int& v) {
  u = (axis + 1) % 3;
  v = (axis + 2) % 3;
}

/// Whether the line through (pu, pv) parallel to `axis` pierces the triangle;
/// on success `height` is the crossing coordinate along `axis`. Triangles seen
/// edge-on are ignored.
inline bool crosses(const Vec3& a, const Vec3& b, const Vec3& c, int axis, double pu, double pv,
                    double& height) {
  int u = 0;
  int v = 0;
  plane_axes(axis, u, v);
  const double au = a[u] - pu, av = a[v] - pv;
  const double bu = b[u] - pu, bv = b[v] - pv;
  const double cu = c[u] - pu, cv = c[v] - pv;
  const double w0 = bu * cv - bv * cu;
  const double w1 = cu * av - cv * au;
  const double w2 = au * bv - av * bu;
  const bool nonneg = w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0;
  const bool nonpos = w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0;
  if (!nonneg && !nonpos) return false;
  const double sum = w0 + w1 + w2;
  if (sum == 0.0) return false;
  height = (w0 * a[axis] + w1 * b[axis] + w2 * c[axis]) / sum;
  return true;
}

}  // namespace usdf::ray_cast
