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

// Glue shared by the command-line tool and the acceptance suite: the shape
// model directory, reconstruction scoring and SDF-space prediction sets.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "usdf/evaluation.hpp"

namespace usdf {

struct ShapeModelConfig {
  int family_size = 20;
  int heldout = 4;
  int surface_samples = 4096;
  int uniform_samples = 1024;
  double surface_noise = 0.02;
  DecoderTrainConfig decoder;
  InferCodeConfig infer;
  int infer_surface_samples = 2048;
  int infer_uniform_samples = 512;
  std::uint64_t seed = 0;
};

/// Decoder plus codebooks for the training split and (inferred) for the held-out split.
struct ShapeModel {
  std::vector<ShapeSpec> family;
  FamilySplit split;
  DecoderModel decoder;
  LatentCodebook codebook;
  LatentCodebook heldout_codebook;
  std::vector<double> loss_trace;
};

ShapeModel train_shape_model(const ShapeModelConfig& config, std::ostream* log = nullptr);

/// Directory layout: family.txt, decoder.usdf, codebook.usdf,
/// heldout_codebook.usdf, decoder_loss.csv.
void save_shape_model(const std::filesystem::path& dir, const ShapeModel& model);
/// The split is rebuilt from the codebooks. Throws DataError naming the first
/// missing or unreadable file.
ShapeModel load_shape_model(const std::filesystem::path& dir);

/// Codes for instances of either split.
const std::vector<double>& code_for(const ShapeModel& model, int instance_id);

/// IoU of voxelize(marching_cubes(decoded code at R)) against the analytic shape.
double reconstruction_iou(const DecoderModel& decoder, std::span<const double> code,
                          const ShapeSpec& spec, int resolution = 32);

/// Scalar SDF predictions pooled over many views.
struct SdfPredictions {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> gt;  // analytic, unclamped
};

struct SdfPredictionConfig {
  int surface_points = 256;
  int uniform_points = 256;
  double surface_noise = 0.02;
  int samples = 64;
  /// Replace every latent variance by 1 (the equal-variance baseline).
  bool equal_variance = false;
  std::uint64_t seed = 0;
};

/// For each (latent, shape) pair, evaluation points near and away from the
/// surface, with Monte-Carlo SDF moments from the decoder.
SdfPredictions predict_sdf(const DecoderModel& decoder, std::span<const LatentGaussian> latents,
                           std::span<const ShapeSpec> shapes, const SdfPredictionConfig& config);

SdfSpaceScores score_predictions(const SdfPredictions& preds, double sdf_clamp, int samples,
                                 std::uint64_t seed);

/// SDF-space calibration of predictions, gt clamped to +-sdf_clamp.
CalibrationCurve sdf_calibration(const SdfPredictions& preds, double sdf_clamp,
                                 int points = kCalibrationPoints);

}  // namespace usdf
