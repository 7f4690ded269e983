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
#include <numbers>

#include "test_util.hpp"
#include "usdf/views.hpp"

using namespace usdf;

namespace {

LatentCodebook codebook_for(const std::vector<ShapeSpec>& family, int dim) {
  LatentCodebook cb;
  for (const auto& s : family) {
    cb.instance_ids.push_back(s.instance_id);
    std::vector<double> z(dim);
    for (int d = 0; d < dim; ++d) z[d] = 0.01 * s.instance_id + 0.001 * d;
    cb.codes.push_back(z);
  }
  return cb;
}

}  // namespace

TEST_CASE("sphere silhouette is a centred disc of the right area") {
  const ShapeSpec s = make_sphere(0.3);
  const RenderOptions opt;
  const double pixel = 2.0 * opt.half_width / opt.resolution;
  const double expected = std::numbers::pi * 0.09 / (pixel * pixel);
  for (double az : {0.0, 0.7, 2.1, 4.0}) {
    const ViewObservation v = render_view(s, {az, 0.3}, opt);
    CAPTURE(az);
    CHECK(std::abs(v.silhouette_count() - expected) <= 0.02 * expected);
    double cr = 0.0, cc = 0.0;
    for (int r = 0; r < v.height; ++r) {
      for (int c = 0; c < v.width; ++c) {
        if (v.silhouette(r, c) == 0.0) {
          CHECK(v.depth(r, c) == 0.0);
          continue;
        }
        cr += r;
        cc += c;
        CHECK(v.depth(r, c) > 0.0);
        CHECK(v.depth(r, c) <= 1.0);
      }
    }
    CHECK(std::abs(cr / v.silhouette_count() - (v.height - 1) / 2.0) < 0.5);
    CHECK(std::abs(cc / v.silhouette_count() - (v.width - 1) / 2.0) < 0.5);
  }
}

TEST_CASE("corner pixel of a small shape is empty") {
  const ViewObservation v = render_view(make_sphere(0.1), {0.4, 0.2});
  CHECK(v.silhouette(0, 0) == 0.0);
  CHECK(v.depth(0, 0) == 0.0);
  CHECK(v.silhouette(v.height - 1, v.width - 1) == 0.0);
}

TEST_CASE("opposite cameras see mirror silhouettes of a symmetric shape") {
  ShapeSpec s;
  s.half_extents = {0.35, 0.2, 0.25};
  s.exponent = 3.0;
  const ViewObservation a = render_view(s, {0.5, 0.0});
  const ViewObservation b = flip_horizontal(render_view(s, {0.5 + std::numbers::pi, 0.0}));
  int differ = 0;
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c) differ += a.silhouette(r, c) != b.silhouette(r, c);
  CHECK(differ == 0);

  // A sphere gives the same silhouette from both sides without mirroring.
  const ViewObservation sa = render_view(make_sphere(0.3), {1.0, 0.2});
  const ViewObservation sb = render_view(make_sphere(0.3), {1.0 + std::numbers::pi, -0.2});
  for (int r = 0; r < sa.height; ++r)
    for (int c = 0; c < sa.width; ++c) CHECK(sa.silhouette(r, c) == sb.silhouette(r, c));
}

TEST_CASE("hit points lie on the surface") {
  const RenderOptions opt;
  for (const auto& s : make_family(6, 2)) {
    for (double az : {0.0, 1.3, 3.9}) {
      const Camera cam{az, 0.4};
      const ViewObservation v = render_view(s, cam, opt);
      for (int r = 0; r < v.height; ++r) {
        for (int c = 0; c < v.width; ++c) {
          if (v.silhouette(r, c) == 0.0) continue;
          const Vec3 p = unproject(cam, opt, r, c, v.depth(r, c));
          CHECK(std::abs(analytic_sdf(s, p)) < 5e-3);
        }
      }
    }
  }
}

TEST_CASE("rendering is deterministic") {
  const ShapeSpec s = make_family(1, 4).front();
  CHECK(render_view(s, {0.3, 0.2}).raster == render_view(s, {0.3, 0.2}).raster);
  RenderOptions bad;
  bad.resolution = 0;
  CHECK_THROWS_AS(render_view(s, {}, bad), UsageError);
}

TEST_CASE("crop corruption") {
  const ViewObservation v = render_view(make_sphere(0.35), {0.2, 0.3});

  SUBCASE("min_scale 1 keeps everything") {
    const ViewObservation c = corrupt_crop(v, 1.0, 5);
    CHECK(c.raster == v.raster);
    CHECK(c.corruption.realized_scale == 1.0);
  }
  SUBCASE("seeded crops are reproducible and only remove pixels") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const ViewObservation a = corrupt_crop(v, 0.1, seed);
      const ViewObservation b = corrupt_crop(v, 0.1, seed);
      CHECK(a.raster == b.raster);
      const auto& rec = a.corruption;
      CHECK(rec.kind == CorruptionKind::random_crop);
      CHECK(rec.realized_scale >= 0.1);
      CHECK(rec.realized_scale <= 1.0);
      CHECK(rec.crop_row + rec.crop_size <= v.height);
      CHECK(rec.crop_col + rec.crop_size <= v.width);
      CHECK(a.silhouette_count() <= v.silhouette_count());
      for (int r = 0; r < v.height; ++r) {
        for (int c = 0; c < v.width; ++c) {
          const bool kept = r >= rec.crop_row && r < rec.crop_row + rec.crop_size &&
                            c >= rec.crop_col && c < rec.crop_col + rec.crop_size;
          CHECK(a.silhouette(r, c) == (kept ? v.silhouette(r, c) : 0.0));
          CHECK(a.depth(r, c) == (kept ? v.depth(r, c) : 0.0));
        }
      }
    }
  }
  SUBCASE("smaller min_scale keeps less on average") {
    const double full = v.silhouette_count();
    double low = 0.0, high = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      low += corrupt_crop(v, 0.1, seed).silhouette_count() / full;
      high += corrupt_crop(v, 0.8, seed).silhouette_count() / full;
    }
    CHECK(low < high);
  }
  CHECK_THROWS_AS(corrupt_crop(v, 0.0, 1), UsageError);
  CHECK_THROWS_AS(corrupt_crop(v, 1.5, 1), UsageError);
}

TEST_CASE("flip is an involution") {
  const ViewObservation v = render_view(make_family(3, 1)[2], {0.9, 0.1});
  CHECK(flip_horizontal(flip_horizontal(v)).raster == v.raster);
}

TEST_CASE("view dataset") {
  const auto family = make_family(16, 3);
  const LatentCodebook cb = codebook_for(family, 4);
  RenderOptions opt;
  opt.resolution = 12;
  const auto ds = make_view_dataset(family, cb, 10, CameraRing{}, 6, opt);
  REQUIRE(ds.size() == 160);
  for (const auto& s : ds) CHECK(s.gt_code == cb.code_for(s.view.instance_id));

  const auto cams = ring_cameras(3, 10, CameraRing{}, 6);
  REQUIRE(cams.size() == 10);
  for (int k = 1; k < 10; ++k) {
    CHECK(std::abs(cams[k].azimuth - cams[k - 1].azimuth - 2 * std::numbers::pi / 10) < 1e-12);
    CHECK(std::abs(cams[k].elevation - CameraRing{}.elevation) <= CameraRing{}.elevation_jitter);
  }
  CHECK(ds[30].view.camera.azimuth == cams[0].azimuth);

  CHECK(shuffled_order(160, 9) == shuffled_order(160, 9));
  CHECK_FALSE(shuffled_order(160, 9) == shuffled_order(160, 10));

  LatentCodebook partial = cb;
  partial.instance_ids.pop_back();
  partial.codes.pop_back();
  CHECK_THROWS_AS(make_view_dataset(family, partial, 2, CameraRing{}, 6, opt), DataError);
}

TEST_CASE("view dataset files round trip") {
  const auto family = make_family(3, 5);
  const LatentCodebook cb = codebook_for(family, 3);
  RenderOptions opt;
  opt.resolution = 16;
  auto ds = make_view_dataset(family, cb, 4, CameraRing{}, 2, opt);
  ds[1].view = corrupt_crop(ds[1].view, 0.3, 8);
  usdf::test::TempDir dir("views");
  save_view_dataset(dir.path(), ds);
  const auto back = load_view_dataset(dir.path(), &cb);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].view.raster == ds[i].view.raster);
    CHECK(back[i].view.instance_id == ds[i].view.instance_id);
    CHECK(back[i].view.camera.azimuth == ds[i].view.camera.azimuth);
    CHECK(back[i].view.camera.elevation == ds[i].view.camera.elevation);
    CHECK(back[i].view.corruption.kind == ds[i].view.corruption.kind);
    CHECK(back[i].view.corruption.realized_scale == ds[i].view.corruption.realized_scale);
    CHECK(back[i].view.corruption.crop_size == ds[i].view.corruption.crop_size);
    CHECK(back[i].gt_code == ds[i].gt_code);
  }
  CHECK(load_view_dataset(dir.path()).front().gt_code.empty());
  CHECK_THROWS_AS(load_view_dataset(dir / "nowhere"), DataError);
}
