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

// Dense arrays, feed-forward networks with reverse-mode gradients, and Adam.
// Shared by the decoder and the encoder.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "usdf/common.hpp"

namespace usdf {

/// Row-major float64 array with explicit shape. No broadcasting.
// Storage is aligned to the widest SIMD width so vectorised kernels take the
// same code path, and give the same rounding, regardless of allocation address.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

struct DenseArray {
  std::vector<std::size_t> shape;
  AlignedDoubles data;

  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> dims, double fill = 0.0);
  DenseArray(std::vector<std::size_t> dims, std::span<const double> values);

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool all_finite() const;
  friend bool operator==(const DenseArray&, const DenseArray&) = default;
};

std::size_t shape_product(std::span<const std::size_t> dims);

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseArray> weights;  // weights[l] is layer_dims[l+1] x layer_dims[l]
  std::vector<DenseArray> biases;   // biases[l] has layer_dims[l+1] entries
  std::vector<Activation> activations;
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_width() const { return layer_dims.front(); }
  std::size_t output_width() const { return layer_dims.back(); }
  std::size_t parameter_count() const;
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
MlpModel make_mlp(std::vector<std::size_t> layer_dims, std::vector<Activation> activations,
                  std::uint64_t seed);

/// Throws DimensionError if the weights and layer_dims disagree.
void validate(const MlpModel& model);

struct ForwardCache {
  std::vector<std::size_t> layer_dims;  // of the model that filled the cache
  std::vector<DenseArray> layer_outputs;  // [0] is the input batch, [l+1] output of layer l
  std::vector<DenseArray> pre_activations;
  bool input_was_vector = false;

  bool empty() const { return layer_outputs.empty(); }
  void clear();
};

struct MlpGradients {
  std::vector<DenseArray> weights;
  std::vector<DenseArray> biases;
  DenseArray input;  // same shape as the forward input

  static MlpGradients zeros_like(const MlpModel& model);
  void accumulate(const MlpGradients& other);
  void scale(double factor);
};

/// Forward pass over a single vector (rank 1) or a batch (rank 2, one row per sample).
/// When `cache` is given it receives everything backward() needs.
DenseArray forward(const MlpModel& model, const DenseArray& input, ForwardCache* cache = nullptr);

/// Reverse-mode pass. `output_grad` has the shape of the forward output.
MlpGradients backward(const MlpModel& model, const ForwardCache& cache,
                      const DenseArray& output_grad);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of one flat parameter block. `step` is the
/// 1-based index of the update being applied.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamHyper& hyper);

struct AdamState {
  // Interleaved per layer: [2l] tracks weights[l], [2l+1] tracks biases[l].
  std::vector<DenseArray> first_moment;
  std::vector<DenseArray> second_moment;
  std::int64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const MlpModel& model, const AdamHyper& hyper = {});

void adam_step(MlpModel& model, const MlpGradients& grads, AdamState& state);

}  // namespace usdf
