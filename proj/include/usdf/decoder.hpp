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

// Conditional SDF decoder f(X, z) and its auto-decoder training loop.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "usdf/shapes.hpp"
#include "usdf/tensor.hpp"

namespace usdf {

/// MLP over [x, y, z, z_1..z_D] with a tanh output scaled by sdf_clamp, so every
/// prediction lies in [-sdf_clamp, sdf_clamp].
struct DecoderModel {
  MlpModel mlp;
  int latent_dim = 8;
  double sdf_clamp = 0.1;
};

struct LatentCodebook {
  std::vector<int> instance_ids;
  std::vector<std::vector<double>> codes;

  std::size_t size() const { return codes.size(); }
  const std::vector<double>& code_for(int instance_id) const;  // throws DataError
  bool contains(int instance_id) const;
};

DecoderModel make_decoder(int latent_dim, std::vector<std::size_t> hidden, double sdf_clamp,
                          std::uint64_t seed);

/// One clamped SDF prediction per point.
std::vector<double> decode_sdf(const DecoderModel& model, std::span<const double> code,
                               std::span<const Vec3> points);

/// Writes decode_sdf into `out`; callers that reuse buffers avoid an allocation.
void decode_sdf_into(const DecoderModel& model, std::span<const double> code,
                     std::span<const Vec3> points, std::span<double> out);

struct DecoderTrainConfig {
  int latent_dim = 8;
  std::vector<std::size_t> hidden{128, 128, 128, 128};
  double sdf_clamp = 0.1;
  int epochs = 500;
  int points_per_shape = 1024;  // drawn from each shape's sample set every epoch
  int batch_size = 1024;
  double lr_weights = 5e-4;
  double lr_codes = 1e-3;
  double code_init_sigma = 0.01;
  double code_reg_weight = 1e-4;
  std::uint64_t seed = 0;
};

struct DecoderTrainResult {
  DecoderModel model;
  LatentCodebook codebook;
  std::vector<double> loss_trace;  // mean clamped-L1 loss per epoch
};

/// Auto-decoder training: jointly optimises the network and one latent code per
/// shape under clamped L1 plus code_reg_weight * ||z||^2. `samples[i]` belongs
/// to `shapes[i]`. Throws TrainingError on a non-finite loss.
DecoderTrainResult train_decoder(const std::vector<ShapeSpec>& shapes,
                                 const std::vector<std::vector<SdfSample>>& samples,
                                 const DecoderTrainConfig& config, std::ostream* log = nullptr);

struct InferCodeConfig {
  int iters = 300;
  double lr = 1e-2;
  double init_sigma = 0.01;
  double code_reg_weight = 1e-4;
  std::uint64_t seed = 0;
};

/// Fits a latent code to SDF samples with the decoder frozen.
std::vector<double> infer_code(const DecoderModel& model, const std::vector<SdfSample>& samples,
                               const InferCodeConfig& config);

/// Mean |clamp(pred) - clamp(sdf)| over the samples.
double clamped_l1(const DecoderModel& model, std::span<const double> code,
                  const std::vector<SdfSample>& samples);

void save_decoder(const std::filesystem::path& path, const DecoderModel& model);
DecoderModel load_decoder(const std::filesystem::path& path);
void save_codebook(const std::filesystem::path& path, const LatentCodebook& codebook);
LatentCodebook load_codebook(const std::filesystem::path& path);

}  // namespace usdf
