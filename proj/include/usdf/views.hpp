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

// Synthetic silhouette + depth views of family shapes and the crop corruption.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "usdf/decoder.hpp"
#include "usdf/shapes.hpp"

namespace usdf {

struct Camera {
  double azimuth = 0.0;    // radians, about +z
  double elevation = 0.0;  // radians above the xy plane
};

enum class CorruptionKind { none, random_crop };

struct CorruptionRecord {
  CorruptionKind kind = CorruptionKind::none;
  double min_scale = 1.0;
  double realized_scale = 1.0;  // kept area fraction
  int crop_row = 0;
  int crop_col = 0;
  int crop_size = 0;
};

/// H x W x 2 raster, channel-last: channel 0 silhouette in {0, 1}, channel 1
/// depth in [0, 1] (1 - t/2 along a ray starting one unit from the origin),
/// background zero.
struct ViewObservation {
  int height = 32;
  int width = 32;
  std::vector<double> raster;
  Camera camera;
  int instance_id = 0;
  CorruptionRecord corruption;

  double silhouette(int r, int c) const { return raster[(static_cast<std::size_t>(r) * width + c) * 2]; }
  double depth(int r, int c) const { return raster[(static_cast<std::size_t>(r) * width + c) * 2 + 1]; }
  int silhouette_count() const;
};

struct RenderOptions {
  int resolution = 32;
  double half_width = 0.7;      // image plane covers [-half_width, half_width]^2
  int max_steps = 64;
  double hit_threshold = 1e-3;
};

/// Orthographic sphere tracing against the shape. Steps use conservative_sdf,
/// a Lipschitz-1 lower bound of the analytic SDF with the same zero set.
ViewObservation render_view(const ShapeSpec& spec, const Camera& camera,
                            const RenderOptions& options = {});

/// World-space point hit by pixel (r, c) given its depth value.
Vec3 unproject(const Camera& camera, const RenderOptions& options, int r, int c, double depth);

/// Keeps a random square covering `realized_scale` ~ U[min_scale, 1] of the image
/// area and zeroes everything outside it. The kept square stays at its native
/// pixel positions, so the nearest-neighbour resample to H x W is the identity.
ViewObservation corrupt_crop(const ViewObservation& view, double min_scale, std::uint64_t seed);

ViewObservation flip_horizontal(const ViewObservation& view);

struct CameraRing {
  double elevation = 0.35;         // radians
  double elevation_jitter = 0.15;  // +- uniform jitter per view
};

struct ViewSample {
  ViewObservation view;
  std::vector<double> gt_code;
};

/// `views_per_instance` evenly spaced azimuths per shape (random ring phase per
/// instance), elevation jittered from the seed. Throws DataError when a shape
/// has no codebook entry.
std::vector<ViewSample> make_view_dataset(const std::vector<ShapeSpec>& family,
                                          const LatentCodebook& codebook, int views_per_instance,
                                          const CameraRing& ring, std::uint64_t seed,
                                          const RenderOptions& options = {});

/// Cameras used by make_view_dataset for one instance.
std::vector<Camera> ring_cameras(int instance_id, int views, const CameraRing& ring,
                                 std::uint64_t seed);

/// Reproducible shuffled visiting order.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

/// Directory of raw little-endian float64 rasters plus manifest.txt.
void save_view_dataset(const std::filesystem::path& dir, const std::vector<ViewSample>& dataset);
/// Loads rasters and manifest; gt codes are resolved against `codebook` when
/// given, otherwise left empty.
std::vector<ViewSample> load_view_dataset(const std::filesystem::path& dir,
                                          const LatentCodebook* codebook = nullptr);

}  // namespace usdf
