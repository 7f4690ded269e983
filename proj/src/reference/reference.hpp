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

// Serial, unoptimised second implementations used as test oracles and as the
// baseline side of the benchmarks. Not part of the installed library.

#include <span>
#include <vector>

#include "usdf/evaluation.hpp"
#include "usdf/fusion.hpp"
#include "usdf/mesh.hpp"
#include "usdf/propagation.hpp"

namespace usdf::reference {

/// Cell-by-cell marching cubes with a hash-map vertex cache.
TriMesh marching_cubes_serial(const GridView& grid, double iso = 0.0);

/// Brute force: every voxel centre tests every triangle along each axis.
VoxelGrid32 voxelize_brute_force(const TriMesh& mesh);

/// Nearest neighbours through a k-d tree.
double chamfer_kdtree(std::span<const Vec3> a, std::span<const Vec3> b);

/// Minimum over all n! matchings; n <= 8.
double emd_brute_force(std::span<const Vec3> a, std::span<const Vec3> b);

/// Stores all M decodes, then computes mean and unbiased variance in two passes.
PointMoments propagate_points_two_pass(const LatentField& field, const LatentGaussian& latent,
                                       std::span<const Vec3> points, int samples,
                                       std::uint64_t seed);

/// Dense-matrix product of Gaussians: Sigma = (sum Sigma_i^-1)^-1,
/// mu = Sigma * sum Sigma_i^-1 mu_i, with full D x D inverses.
LatentGaussian fuse_dense(std::span<const LatentGaussian> observations);

}  // namespace usdf::reference
