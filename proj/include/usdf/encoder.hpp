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

// Uncertainty-aware encoder: view -> diagonal Gaussian over latent codes,
// trained with NLL or the Monte-Carlo Energy Score.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "usdf/tensor.hpp"
#include "usdf/views.hpp"

namespace usdf {

/// N(mean, diag(var)); var >= kVarFloor elementwise.
struct LatentGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  std::size_t dim() const { return mean.size(); }
  double trace() const;
};

/// Network input is the flattened raster; output is [mean (D), raw variance head (D)]
/// with var = exp(head) + kVarFloor.
struct EncoderModel {
  MlpModel mlp;
  int latent_dim = 8;
  int height = 32;
  int width = 32;
};

EncoderModel make_encoder(int latent_dim, int height, int width, std::vector<std::size_t> hidden,
                          std::uint64_t seed);

LatentGaussian encode(const EncoderModel& model, const ViewObservation& view);
std::vector<LatentGaussian> encode_batch(const EncoderModel& model,
                                         std::span<const ViewObservation> views);

/// Loss value with gradients w.r.t. each prediction's mean and log-variance,
/// both N x D.
struct LossResult {
  double value = 0.0;
  DenseArray grad_mean;
  DenseArray grad_logvar;
};

/// (1/2N) sum_i [(mu_i - z_i)^T Sigma_i^-1 (mu_i - z_i) + log det Sigma_i].
LossResult nll_loss(std::span<const LatentGaussian> preds,
                    std::span<const std::vector<double>> targets);

/// (1/N) sum_i [ (1/M) sum_m ||z_im - z_i|| - 1/(2(M-1)) sum_{m<M} ||z_im - z_i,m+1|| ]
/// with reparameterised samples z_im = mu_i + sigma_i * eps_im. The noise is a
/// deterministic function of `seed`, so equal seeds give common random numbers.
LossResult energy_score_loss(std::span<const LatentGaussian> preds,
                             std::span<const std::vector<double>> targets, int samples,
                             std::uint64_t seed);

enum class EncoderLoss { nll, es };

std::string to_string(EncoderLoss loss);
EncoderLoss encoder_loss_from_string(const std::string& name);

struct Augmentation {
  double crop_probability = 0.6;
  double min_scale_low = 0.05;  // per-batch min_scale ~ U[min_scale_low, 1]
  double flip_probability = 0.5;
};

struct EncoderTrainConfig {
  EncoderLoss loss = EncoderLoss::es;
  int mc_samples = 64;
  int epochs = 150;
  int batch_size = 32;
  double lr = 3e-4;
  std::vector<std::size_t> hidden{512, 256};
  Augmentation augmentation;
  bool augment = true;
  int mean_pretrain_epochs = 0;  // plain L2 on the mean head before the uncertainty loss
  std::uint64_t seed = 0;
};

struct EncoderTrainResult {
  EncoderModel model;
  std::vector<double> loss_trace;  // per-epoch mean training loss
};

/// Trains against the codebook targets carried by the dataset; the decoder stays
/// frozen and is not consulted. Throws TrainingError on divergence.
EncoderTrainResult train_encoder(const std::vector<ViewSample>& dataset,
                                 const EncoderTrainConfig& config, std::ostream* log = nullptr);

void save_encoder(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel load_encoder(const std::filesystem::path& path);

}  // namespace usdf
