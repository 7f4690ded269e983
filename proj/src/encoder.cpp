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

#include "usdf/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "usdf/container.hpp"

namespace usdf {
namespace {

constexpr double kMinHead = -30.0;
constexpr double kMaxHead = 20.0;

double head_to_var(double head) { return std::exp(std::clamp(head, kMinHead, kMaxHead)) + kVarFloor; }

DenseArray flatten_views(std::span<const ViewObservation> views, std::size_t width) {
  DenseArray in({views.size(), width});
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].raster.size() != width) {
      throw DimensionError("encoder: raster size " + std::to_string(views[i].raster.size()) +
                           " does not match encoder input width " + std::to_string(width));
    }
    std::copy(views[i].raster.begin(), views[i].raster.end(),
              in.data.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return in;
}

LatentGaussian gaussian_from_row(const DenseArray& out, std::size_t row, std::size_t dim) {
  LatentGaussian g;
  g.mean.resize(dim);
  g.var.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    g.mean[d] = out(row, d);
    g.var[d] = head_to_var(out(row, dim + d));
  }
  return g;
}

void check_batch(std::span<const LatentGaussian> preds, std::span<const std::vector<double>> targets) {
  if (preds.empty()) throw UsageError("loss: empty batch");
  if (preds.size() != targets.size()) throw DimensionError("loss: prediction/target count mismatch");
  const std::size_t dim = preds.front().dim();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].mean.size() != dim || preds[i].var.size() != dim || targets[i].size() != dim) {
      throw DimensionError("loss: inconsistent latent dimensions");
    }
    for (double v : preds[i].var) {
      if (!(v > 0.0)) throw NumericError("loss: non-positive variance");
    }
  }
}

}  // namespace

double LatentGaussian::trace() const { return std::accumulate(var.begin(), var.end(), 0.0); }

EncoderModel make_encoder(int latent_dim, int height, int width, std::vector<std::size_t> hidden,
                          std::uint64_t seed) {
  if (latent_dim < 1 || height < 1 || width < 1) throw UsageError("make_encoder: invalid sizes");
  std::vector<std::size_t> dims{static_cast<std::size_t>(height) * width * 2};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(2 * static_cast<std::size_t>(latent_dim));
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  EncoderModel model;
  model.mlp = make_mlp(std::move(dims), std::move(acts), seed);
  model.latent_dim = latent_dim;
  model.height = height;
  model.width = width;
  return model;
}

std::vector<LatentGaussian> encode_batch(const EncoderModel& model,
                                         std::span<const ViewObservation> views) {
  const DenseArray out = forward(model.mlp, flatten_views(views, model.mlp.input_width()));
  std::vector<LatentGaussian> result;
  result.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    result.push_back(gaussian_from_row(out, i, static_cast<std::size_t>(model.latent_dim)));
  }
  return result;
}

LatentGaussian encode(const EncoderModel& model, const ViewObservation& view) {
  return encode_batch(model, std::span<const ViewObservation>(&view, 1)).front();
}

LossResult nll_loss(std::span<const LatentGaussian> preds,
                    std::span<const std::vector<double>> targets) {
  check_batch(preds, targets);
  const std::size_t n = preds.size();
  const std::size_t dim = preds.front().dim();
  LossResult r;
  r.grad_mean = DenseArray({n, dim});
  r.grad_logvar = DenseArray({n, dim});
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double err = preds[i].mean[d] - targets[i][d];
      const double var = preds[i].var[d];
      const double scaled = err * err / var;
      total += scaled + std::log(var);
      r.grad_mean(i, d) = inv_n * err / var;
      r.grad_logvar(i, d) = 0.5 * inv_n * (1.0 - scaled);
    }
  }
  r.value = 0.5 * inv_n * total;
  return r;
}

LossResult energy_score_loss(std::span<const LatentGaussian> preds,
                             std::span<const std::vector<double>> targets, int samples,
                             std::uint64_t seed) {
  if (samples < 2) throw UsageError("energy_score_loss: need at least two samples");
  check_batch(preds, targets);
  const std::size_t n = preds.size();
  const std::size_t dim = preds.front().dim();
  const auto m_count = static_cast<std::size_t>(samples);
  LossResult r;
  r.grad_mean = DenseArray({n, dim});
  r.grad_logvar = DenseArray({n, dim});

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(m_count * dim);
  std::vector<double> z(m_count * dim);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double w_first = 1.0 / static_cast<double>(m_count);
  const double w_pair = 1.0 / (2.0 * static_cast<double>(m_count - 1));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = preds[i];
    std::vector<double> sigma(dim);
    for (std::size_t d = 0; d < dim; ++d) sigma[d] = std::sqrt(g.var[d]);
    for (double& e : eps) e = normal(rng);
    for (std::size_t m = 0; m < m_count; ++m) {
      for (std::size_t d = 0; d < dim; ++d) z[m * dim + d] = g.mean[d] + sigma[d] * eps[m * dim + d];
    }
    double first = 0.0;
    double pair = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = z[m * dim + d] - targets[i][d];
        sq += diff * diff;
      }
      const double norm = std::sqrt(sq);
      first += norm;
      if (norm > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double u = (z[m * dim + d] - targets[i][d]) / norm;
          r.grad_mean(i, d) += inv_n * w_first * u;
          r.grad_logvar(i, d) += inv_n * w_first * u * 0.5 * sigma[d] * eps[m * dim + d];
        }
      }
    }
    for (std::size_t m = 0; m + 1 < m_count; ++m) {
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = z[m * dim + d] - z[(m + 1) * dim + d];
        sq += diff * diff;
      }
      const double norm = std::sqrt(sq);
      pair += norm;
      if (norm > 0.0) {
        // The mean cancels in z_m - z_{m+1}; only the spread receives gradient.
        for (std::size_t d = 0; d < dim; ++d) {
          const double u = (z[m * dim + d] - z[(m + 1) * dim + d]) / norm;
          const double deps = eps[m * dim + d] - eps[(m + 1) * dim + d];
          r.grad_logvar(i, d) -= inv_n * w_pair * u * 0.5 * sigma[d] * deps;
        }
      }
    }
    total += w_first * first - w_pair * pair;
  }
  r.value = inv_n * total;
  return r;
}

std::string to_string(EncoderLoss loss) { return loss == EncoderLoss::nll ? "nll" : "es"; }

EncoderLoss encoder_loss_from_string(const std::string& name) {
  if (name == "nll") return EncoderLoss::nll;
  if (name == "es") return EncoderLoss::es;
  throw UsageError("unknown encoder loss '" + name + "' (expected nll or es)");
}

EncoderTrainResult train_encoder(const std::vector<ViewSample>& dataset,
                                 const EncoderTrainConfig& config, std::ostream* log) {
  if (dataset.empty()) throw UsageError("train_encoder: empty dataset");
  if (config.batch_size < 1 || config.epochs < 0) throw UsageError("train_encoder: invalid schedule");
  const std::size_t dim = dataset.front().gt_code.size();
  if (dim == 0) throw DataError("train_encoder: dataset views carry no codebook targets");
  for (const auto& s : dataset) {
    if (s.gt_code.size() != dim) throw DataError("train_encoder: inconsistent codebook targets");
  }
  const auto& first_view = dataset.front().view;

  EncoderTrainResult result;
  result.model = make_encoder(static_cast<int>(dim), first_view.height, first_view.width,
                              config.hidden, derive_seed(config.seed, "encoder_init"));
  EncoderModel& model = result.model;
  AdamState adam = make_adam(model.mlp, AdamHyper{config.lr});
  std::mt19937_64 rng(derive_seed(config.seed, "encoder_train"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> scale_dist(config.augmentation.min_scale_low, 1.0);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ForwardCache cache;
  const int total_epochs = config.mean_pretrain_epochs + config.epochs;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool pretraining = epoch < config.mean_pretrain_epochs;
    adam.lr = epoch >= config.mean_pretrain_epochs + config.epochs * 0.75 ? 0.3 * config.lr : config.lr;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
      const double batch_min_scale = scale_dist(rng);
      std::vector<ViewObservation> views;
      std::vector<std::vector<double>> targets;
      views.reserve(b);
      for (std::size_t k = 0; k < b; ++k) {
        const ViewSample& s = dataset[order[start + k]];
        ViewObservation v = s.view;
        if (config.augment) {
          if (unit(rng) < config.augmentation.crop_probability) {
            v = corrupt_crop(v, batch_min_scale, rng());
          }
          if (unit(rng) < config.augmentation.flip_probability) v = flip_horizontal(v);
        }
        views.push_back(std::move(v));
        targets.push_back(s.gt_code);
      }
      const DenseArray out = forward(model.mlp, flatten_views(views, model.mlp.input_width()), &cache);
      std::vector<LatentGaussian> preds;
      for (std::size_t k = 0; k < b; ++k) preds.push_back(gaussian_from_row(out, k, dim));

      DenseArray out_grad({b, 2 * dim});
      double value = 0.0;
      if (pretraining) {
        for (std::size_t k = 0; k < b; ++k) {
          for (std::size_t d = 0; d < dim; ++d) {
            const double err = preds[k].mean[d] - targets[k][d];
            value += 0.5 * err * err / static_cast<double>(b);
            out_grad(k, d) = err / static_cast<double>(b);
          }
        }
      } else {
        const LossResult loss = config.loss == EncoderLoss::nll
                                    ? nll_loss(preds, targets)
                                    : energy_score_loss(preds, targets, config.mc_samples, rng());
        value = loss.value;
        for (std::size_t k = 0; k < b; ++k) {
          for (std::size_t d = 0; d < dim; ++d) {
            out_grad(k, d) = loss.grad_mean(k, d);
            const double head = out(k, dim + d);
            if (head > kMinHead && head < kMaxHead) {
              // d(log var)/d(head) = exp(head) / var
              out_grad(k, dim + d) = loss.grad_logvar(k, d) * std::exp(head) / preds[k].var[d];
            }
          }
        }
      }
      if (!std::isfinite(value)) {
        throw TrainingError("train_encoder: non-finite loss at epoch " + std::to_string(epoch));
      }
      const MlpGradients g = backward(model.mlp, cache, out_grad);
      adam_step(model.mlp, g, adam);
      epoch_loss += value;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.loss_trace.push_back(epoch_loss);
    if (log && (epoch % 25 == 0 || epoch + 1 == total_epochs)) {
      *log << "encoder epoch " << epoch << (pretraining ? " (mean pretrain)" : "") << " loss "
           << epoch_loss << '\n';
    }
  }
  return result;
}

void save_encoder(const std::filesystem::path& path, const EncoderModel& model) {
  Container c;
  c.kind = "encoder";
  c.set("latent_dim", std::to_string(model.latent_dim));
  c.set("height", std::to_string(model.height));
  c.set("width", std::to_string(model.width));
  put_mlp(c, model.mlp);
  save_container(path, c);
}

EncoderModel load_encoder(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (c.kind != "encoder") throw DataError(path.string() + ": not an encoder container");
  EncoderModel model;
  model.latent_dim = std::stoi(c.get("latent_dim"));
  model.height = std::stoi(c.get("height"));
  model.width = std::stoi(c.get("width"));
  model.mlp = get_mlp(c);
  if (model.mlp.input_width() != static_cast<std::size_t>(model.height) * model.width * 2 ||
      model.mlp.output_width() != 2 * static_cast<std::size_t>(model.latent_dim)) {
    throw DataError(path.string() + ": encoder network does not match its header");
  }
  return model;
}

}  // namespace usdf
