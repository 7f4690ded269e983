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

#include "usdf/views.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace usdf {
namespace {

struct Frame {
  Vec3 toward_camera;
  Vec3 right;
  Vec3 up;
};

Frame camera_frame(const Camera& cam) {
  Frame f;
  f.toward_camera = Vec3(std::cos(cam.elevation) * std::cos(cam.azimuth),
                         std::cos(cam.elevation) * std::sin(cam.azimuth), std::sin(cam.elevation));
  f.right = Vec3(-std::sin(cam.azimuth), std::cos(cam.azimuth), 0.0);
  f.up = f.toward_camera.cross(f.right);
  return f;
}

Vec3 pixel_origin(const Frame& f, const RenderOptions& o, int r, int c) {
  const double u = (-1.0 + (2.0 * c + 1.0) / o.resolution) * o.half_width;
  const double v = (1.0 - (2.0 * r + 1.0) / o.resolution) * o.half_width;
  return f.toward_camera + u * f.right + v * f.up;
}

const char* kind_name(CorruptionKind k) { return k == CorruptionKind::none ? "none" : "random_crop"; }

CorruptionKind kind_from(const std::string& s) {
  if (s == "none") return CorruptionKind::none;
  if (s == "random_crop") return CorruptionKind::random_crop;
  throw DataError("unknown corruption kind '" + s + "'");
}

}  // namespace

int ViewObservation::silhouette_count() const {
  int n = 0;
  for (std::size_t i = 0; i < raster.size(); i += 2) n += raster[i] > 0.5 ? 1 : 0;
  return n;
}

ViewObservation render_view(const ShapeSpec& spec, const Camera& camera,
                            const RenderOptions& options) {
  if (options.resolution < 1) throw UsageError("render_view: resolution must be positive");
  validate(spec);
  ViewObservation view;
  view.height = view.width = options.resolution;
  view.raster.assign(static_cast<std::size_t>(options.resolution) * options.resolution * 2, 0.0);
  view.camera = camera;
  view.instance_id = spec.instance_id;
  const Frame f = camera_frame(camera);
  const Vec3 dir = -f.toward_camera;
  for (int r = 0; r < options.resolution; ++r) {
    for (int c = 0; c < options.resolution; ++c) {
      const Vec3 origin = pixel_origin(f, options, r, c);
      double t = 0.0;
      for (int step = 0; step < options.max_steps && t <= 2.0; ++step) {
        const double d = conservative_sdf(spec, origin + t * dir);
        if (d < options.hit_threshold) {
          const std::size_t idx = (static_cast<std::size_t>(r) * options.resolution + c) * 2;
          view.raster[idx] = 1.0;
          view.raster[idx + 1] = 1.0 - t / 2.0;
          break;
        }
        t += d;
      }
    }
  }
  return view;
}

Vec3 unproject(const Camera& camera, const RenderOptions& options, int r, int c, double depth) {
  const Frame f = camera_frame(camera);
  const double t = 2.0 * (1.0 - depth);
  return pixel_origin(f, options, r, c) - t * f.toward_camera;
}

ViewObservation corrupt_crop(const ViewObservation& view, double min_scale, std::uint64_t seed) {
  if (!(min_scale > 0.0 && min_scale <= 1.0)) {
    throw UsageError("corrupt_crop: min_scale must lie in (0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale_dist(min_scale, 1.0);
  const double scale = min_scale == 1.0 ? 1.0 : scale_dist(rng);
  const int n = std::min(view.height, view.width);
  const int side = std::clamp(static_cast<int>(std::lround(std::sqrt(scale) * n)), 1, n);
  std::uniform_int_distribution<int> row_dist(0, view.height - side);
  std::uniform_int_distribution<int> col_dist(0, view.width - side);
  const int r0 = row_dist(rng);
  const int c0 = col_dist(rng);

  ViewObservation out = view;
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) {
      if (r >= r0 && r < r0 + side && c >= c0 && c < c0 + side) continue;
      const std::size_t idx = (static_cast<std::size_t>(r) * view.width + c) * 2;
      out.raster[idx] = 0.0;
      out.raster[idx + 1] = 0.0;
    }
  }
  out.corruption.kind = CorruptionKind::random_crop;
  out.corruption.min_scale = min_scale;
  out.corruption.realized_scale = scale;
  out.corruption.crop_row = r0;
  out.corruption.crop_col = c0;
  out.corruption.crop_size = side;
  return out;
}

ViewObservation flip_horizontal(const ViewObservation& view) {
  ViewObservation out = view;
  for (int r = 0; r < view.height; ++r) {
    for (int c = 0; c < view.width; ++c) {
      const std::size_t src = (static_cast<std::size_t>(r) * view.width + (view.width - 1 - c)) * 2;
      const std::size_t dst = (static_cast<std::size_t>(r) * view.width + c) * 2;
      out.raster[dst] = view.raster[src];
      out.raster[dst + 1] = view.raster[src + 1];
    }
  }
  return out;
}

std::vector<Camera> ring_cameras(int instance_id, int views, const CameraRing& ring,
                                 std::uint64_t seed) {
  if (views < 1) throw UsageError("ring_cameras: need at least one view");
  std::mt19937_64 rng(derive_seed(derive_seed(seed, "camera_ring"),
                                  static_cast<std::uint64_t>(instance_id)));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-ring.elevation_jitter, ring.elevation_jitter);
  const double start = phase(rng);
  std::vector<Camera> cams;
  for (int k = 0; k < views; ++k) {
    cams.push_back({start + 2.0 * std::numbers::pi * k / views, ring.elevation + jitter(rng)});
  }
  return cams;
}

std::vector<ViewSample> make_view_dataset(const std::vector<ShapeSpec>& family,
                                          const LatentCodebook& codebook, int views_per_instance,
                                          const CameraRing& ring, std::uint64_t seed,
                                          const RenderOptions& options) {
  std::vector<ViewSample> out;
  for (const auto& spec : family) {
    if (!codebook.contains(spec.instance_id)) {
      throw DataError("make_view_dataset: codebook has no entry for instance " +
                      std::to_string(spec.instance_id));
    }
    const auto& code = codebook.code_for(spec.instance_id);
    for (const Camera& cam : ring_cameras(spec.instance_id, views_per_instance, ring, seed)) {
      out.push_back({render_view(spec, cam, options), code});
    }
  }
  return out;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, "shuffle"));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void save_view_dataset(const std::filesystem::path& dir, const std::vector<ViewSample>& dataset) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot write '" + (dir / "manifest.txt").string() + "'");
  const int h = dataset.empty() ? 0 : dataset.front().view.height;
  const int w = dataset.empty() ? 0 : dataset.front().view.width;
  manifest << "# usdf-views 1 " << h << ' ' << w << '\n';
  manifest << "# file instance_id azimuth elevation corruption min_scale realized_scale crop_row "
              "crop_col crop_size code_ref\n";
  manifest << std::setprecision(17);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& v = dataset[i].view;
    if (v.height != h || v.width != w) throw DataError("save_view_dataset: mixed resolutions");
    std::ostringstream name;
    name << "view_" << std::setw(6) << std::setfill('0') << i << ".raw";
    std::ofstream raw(dir / name.str(), std::ios::binary);
    if (!raw) throw DataError("cannot write '" + (dir / name.str()).string() + "'");
    for (double value : v.raster) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      raw.write(reinterpret_cast<const char*>(&bits), 8);
    }
    const auto& c = v.corruption;
    manifest << name.str() << ' ' << v.instance_id << ' ' << v.camera.azimuth << ' '
             << v.camera.elevation << ' ' << kind_name(c.kind) << ' ' << c.min_scale << ' '
             << c.realized_scale << ' ' << c.crop_row << ' ' << c.crop_col << ' ' << c.crop_size
             << ' ' << (dataset[i].gt_code.empty() ? -1 : v.instance_id) << '\n';
  }
}

std::vector<ViewSample> load_view_dataset(const std::filesystem::path& dir,
                                          const LatentCodebook* codebook) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot read '" + (dir / "manifest.txt").string() + "'");
  std::string line;
  std::getline(manifest, line);
  int h = 0;
  int w = 0;
  {
    std::istringstream is(line);
    std::string hash, tag;
    int version = 0;
    is >> hash >> tag >> version >> h >> w;
    if (tag != "usdf-views" || version != 1) throw DataError("view manifest: bad header");
  }
  std::vector<ViewSample> out;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string file, kind;
    ViewSample s;
    auto& v = s.view;
    auto& c = v.corruption;
    int code_ref = -1;
    is >> file >> v.instance_id >> v.camera.azimuth >> v.camera.elevation >> kind >> c.min_scale >>
        c.realized_scale >> c.crop_row >> c.crop_col >> c.crop_size >> code_ref;
    if (!is) throw DataError("view manifest: malformed line '" + line + "'");
    c.kind = kind_from(kind);
    v.height = h;
    v.width = w;
    v.raster.resize(static_cast<std::size_t>(h) * w * 2);
    std::ifstream raw(dir / file, std::ios::binary);
    for (double& value : v.raster) {
      std::uint64_t bits = 0;
      raw.read(reinterpret_cast<char*>(&bits), 8);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      value = std::bit_cast<double>(bits);
    }
    if (!raw) throw DataError("view raster '" + (dir / file).string() + "' is truncated");
    if (codebook && code_ref >= 0) s.gt_code = codebook->code_for(code_ref);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace usdf
