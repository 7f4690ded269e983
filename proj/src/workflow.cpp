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

#include "usdf/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace usdf {

ShapeModel train_shape_model(const ShapeModelConfig& config, std::ostream* log) {
  if (config.family_size < 2 || config.heldout < 0 || config.heldout >= config.family_size) {
    throw UsageError("train_shape_model: need 0 <= heldout < family_size and family_size >= 2");
  }
  ShapeModel m;
  m.family = make_family(config.family_size, derive_seed(config.seed, "family"));
  m.split = split_family(m.family, config.heldout);

  const std::uint64_t sample_seed = derive_seed(config.seed, "decoder_samples");
  std::vector<std::vector<SdfSample>> samples;
  for (const auto& s : m.split.train) {
    samples.push_back(sample_training_points(s, config.surface_samples, config.uniform_samples,
                                             config.surface_noise,
                                             derive_seed(sample_seed, static_cast<std::uint64_t>(s.instance_id))));
  }
  DecoderTrainConfig dc = config.decoder;
  dc.seed = derive_seed(config.seed, "decoder_train");
  DecoderTrainResult r = train_decoder(m.split.train, samples, dc, log);
  m.decoder = std::move(r.model);
  m.codebook = std::move(r.codebook);
  m.loss_trace = std::move(r.loss_trace);

  const std::uint64_t infer_seed = derive_seed(config.seed, "heldout_infer");
  for (const auto& s : m.split.heldout) {
    const auto id = static_cast<std::uint64_t>(s.instance_id);
    const auto pts = sample_training_points(s, config.infer_surface_samples, config.infer_uniform_samples,
                                            config.surface_noise, derive_seed(infer_seed, 2 * id));
    InferCodeConfig ic = config.infer;
    ic.seed = derive_seed(infer_seed, 2 * id + 1);
    m.heldout_codebook.instance_ids.push_back(s.instance_id);
    m.heldout_codebook.codes.push_back(infer_code(m.decoder, pts, ic));
    if (log) *log << "held-out instance " << s.instance_id << " code inferred\n";
  }
  return m;
}

void save_shape_model(const std::filesystem::path& dir, const ShapeModel& model) {
  std::filesystem::create_directories(dir);
  save_family_manifest(dir / "family.txt", model.family);
  save_decoder(dir / "decoder.usdf", model.decoder);
  save_codebook(dir / "codebook.usdf", model.codebook);
  save_codebook(dir / "heldout_codebook.usdf", model.heldout_codebook);
  std::ofstream out(dir / "decoder_loss.csv");
  if (!out) throw DataError("cannot write '" + (dir / "decoder_loss.csv").string() + "'");
  out << "epoch,loss\n" << std::setprecision(10);
  for (std::size_t e = 0; e < model.loss_trace.size(); ++e) out << e << ',' << model.loss_trace[e] << '\n';
}

ShapeModel load_shape_model(const std::filesystem::path& dir) {
  for (const char* name : {"family.txt", "decoder.usdf", "codebook.usdf", "heldout_codebook.usdf"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw DataError("model file '" + (dir / name).string() + "' is missing");
    }
  }
  ShapeModel m;
  m.family = load_family_manifest(dir / "family.txt");
  m.decoder = load_decoder(dir / "decoder.usdf");
  m.codebook = load_codebook(dir / "codebook.usdf");
  m.heldout_codebook = load_codebook(dir / "heldout_codebook.usdf");
  for (const auto& s : m.family) {
    if (m.heldout_codebook.contains(s.instance_id)) {
      m.split.heldout.push_back(s);
    } else if (m.codebook.contains(s.instance_id)) {
      m.split.train.push_back(s);
    } else {
      throw DataError(dir.string() + ": instance " + std::to_string(s.instance_id) +
                      " has no code in either codebook");
    }
  }
  for (const auto* cb : {&m.codebook, &m.heldout_codebook}) {
    for (const auto& code : cb->codes) {
      if (static_cast<int>(code.size()) != m.decoder.latent_dim) {
        throw DataError(dir.string() + ": codebook dimension differs from the decoder");
      }
    }
  }
  return m;
}

const std::vector<double>& code_for(const ShapeModel& model, int instance_id) {
  if (model.codebook.contains(instance_id)) return model.codebook.code_for(instance_id);
  return model.heldout_codebook.code_for(instance_id);
}

double reconstruction_iou(const DecoderModel& decoder, std::span<const double> code,
                          const ShapeSpec& spec, int resolution) {
  const DecoderField field(decoder);
  const auto values = decode_grid(field, code, resolution);
  return iou(voxelize(marching_cubes(unit_grid(values, resolution))), voxelize(spec));
}

SdfPredictions predict_sdf(const DecoderModel& decoder, std::span<const LatentGaussian> latents,
                           std::span<const ShapeSpec> shapes, const SdfPredictionConfig& config) {
  if (latents.size() != shapes.size()) throw DimensionError("predict_sdf: one shape per latent");
  const DecoderField field(decoder);
  SdfPredictions out;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const std::uint64_t s = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    const auto pts = sample_training_points(shapes[i], config.surface_points, config.uniform_points,
                                            config.surface_noise, derive_seed(s, "points"));
    std::vector<Vec3> points;
    points.reserve(pts.size());
    for (const auto& p : pts) {
      points.push_back(p.point);
      out.gt.push_back(p.sdf);
    }
    LatentGaussian g = latents[i];
    if (config.equal_variance) std::fill(g.var.begin(), g.var.end(), 1.0);
    const PointMoments pm = propagate_points(field, g, points, config.samples, derive_seed(s, "codes"));
    out.mean.insert(out.mean.end(), pm.mean.begin(), pm.mean.end());
    out.var.insert(out.var.end(), pm.var.begin(), pm.var.end());
  }
  return out;
}

SdfSpaceScores score_predictions(const SdfPredictions& preds, double sdf_clamp, int samples,
                                 std::uint64_t seed) {
  return score_sdf_space(preds.mean, preds.var, preds.gt, sdf_clamp, samples, seed);
}

CalibrationCurve sdf_calibration(const SdfPredictions& preds, double sdf_clamp, int points) {
  std::vector<double> sigma(preds.var.size()), gt(preds.gt.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    sigma[i] = std::sqrt(std::max(preds.var[i], kVarFloor));
    gt[i] = std::clamp(preds.gt[i], -sdf_clamp, sdf_clamp);
  }
  return calibration_curve(preds.mean, sigma, gt, CalibrationSpace::sdf, points);
}

}  // namespace usdf
