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

#include "test_util.hpp"
#include "usdf/workflow.hpp"

using namespace usdf;

namespace {

ShapeModelConfig tiny_config() {
  ShapeModelConfig c;
  c.family_size = 4;
  c.heldout = 1;
  c.surface_samples = 128;
  c.uniform_samples = 32;
  c.decoder.latent_dim = 3;
  c.decoder.hidden = {16, 16};
  c.decoder.epochs = 5;
  c.decoder.points_per_shape = 64;
  c.decoder.batch_size = 64;
  c.infer.iters = 5;
  c.infer_surface_samples = 64;
  c.infer_uniform_samples = 16;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("shape model round trips through its directory") {
  const ShapeModel m = train_shape_model(tiny_config());
  CHECK(m.split.train.size() == 3);
  CHECK(m.split.heldout.size() == 1);
  CHECK(m.codebook.size() == 3);
  CHECK(m.heldout_codebook.size() == 1);
  CHECK(m.loss_trace.size() == 5);

  usdf::test::TempDir dir("workflow");
  save_shape_model(dir.path(), m);
  const ShapeModel back = load_shape_model(dir.path());
  CHECK(back.family == m.family);
  CHECK(back.split.train == m.split.train);
  CHECK(back.split.heldout == m.split.heldout);
  CHECK(back.codebook.codes == m.codebook.codes);
  CHECK(back.heldout_codebook.codes == m.heldout_codebook.codes);
  CHECK(back.decoder.mlp.weights == m.decoder.mlp.weights);
  CHECK(code_for(back, 3) == m.heldout_codebook.codes[0]);
  CHECK(code_for(back, 0) == m.codebook.codes[0]);

  // Same seed, same bytes.
  usdf::test::TempDir again("workflow2");
  save_shape_model(again.path(), train_shape_model(tiny_config()));
  CHECK(load_shape_model(again.path()).codebook.codes == m.codebook.codes);

  std::filesystem::remove(dir / "codebook.usdf");
  CHECK_THROWS_AS(load_shape_model(dir.path()), DataError);
  CHECK_THROWS_AS(load_shape_model(dir / "missing"), DataError);

  ShapeModelConfig bad = tiny_config();
  bad.heldout = 4;
  CHECK_THROWS_AS(train_shape_model(bad), UsageError);
}

TEST_CASE("SDF predictions and the equal-variance baseline") {
  const ShapeModel m = train_shape_model(tiny_config());
  std::vector<LatentGaussian> latents;
  for (const auto& z : m.codebook.codes) latents.push_back({z, std::vector<double>(z.size(), 1e-4)});
  SdfPredictionConfig pc;
  pc.surface_points = 20;
  pc.uniform_points = 10;
  pc.samples = 16;
  pc.seed = 2;
  const SdfPredictions p = predict_sdf(m.decoder, latents, m.split.train, pc);
  CHECK(p.mean.size() == 90);
  CHECK(p.var.size() == 90);
  CHECK(p.gt.size() == 90);
  pc.equal_variance = true;
  const SdfPredictions q = predict_sdf(m.decoder, latents, m.split.train, pc);
  CHECK(q.gt == p.gt);
  double pv = 0.0, qv = 0.0;
  for (std::size_t i = 0; i < p.var.size(); ++i) {
    pv += p.var[i];
    qv += q.var[i];
    CHECK(std::abs(q.mean[i]) <= m.decoder.sdf_clamp);
  }
  CHECK(qv > pv);

  const SdfSpaceScores s = score_predictions(p, m.decoder.sdf_clamp, 32, 1);
  CHECK(s.all.count == 90);
  CHECK(s.surface.count + s.non_surface.count == 90);

  // 90 pairs is below the calibration minimum.
  CHECK_THROWS_AS(sdf_calibration(p, m.decoder.sdf_clamp), UsageError);

  CHECK_THROWS_AS(predict_sdf(m.decoder, latents, m.split.heldout, pc), DimensionError);

  const double r = reconstruction_iou(m.decoder, m.codebook.codes[0], m.split.train[0], 16);
  CHECK(r >= 0.0);
  CHECK(r <= 1.0);
}
