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

#include "usdf/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace usdf {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap as_matrix(const DenseArray& a) {
  return {a.data.data(), static_cast<Eigen::Index>(a.shape[0]),
          static_cast<Eigen::Index>(a.shape[1])};
}

MatMap as_matrix(DenseArray& a) {
  return {a.data.data(), static_cast<Eigen::Index>(a.shape[0]),
          static_cast<Eigen::Index>(a.shape[1])};
}

void apply_activation(Activation act, DenseArray& z) {
  switch (act) {
    case Activation::relu:
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (double& v : z.data) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), data(shape_product(shape), fill) {}

DenseArray::DenseArray(std::vector<std::size_t> dims, std::span<const double> values)
    : shape(std::move(dims)), data(values.begin(), values.end()) {
  if (shape_product(shape) != data.size()) {
    throw DimensionError("DenseArray: shape product " + std::to_string(shape_product(shape)) +
                         " != data length " + std::to_string(data.size()));
  }
}

std::size_t DenseArray::rows() const { return shape.empty() ? 0 : shape[0]; }

std::size_t DenseArray::cols() const {
  if (shape.size() < 2) return shape.empty() ? 0 : 1;
  return shape[1];
}

bool DenseArray::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::size_t shape_product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw DataError("unknown activation '" + name + "'");
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

MlpModel make_mlp(std::vector<std::size_t> layer_dims, std::vector<Activation> activations,
                  std::uint64_t seed) {
  if (layer_dims.size() < 2) throw DimensionError("make_mlp: need at least two layer dims");
  if (activations.size() != layer_dims.size() - 1) {
    throw DimensionError("make_mlp: one activation per layer required");
  }
  MlpModel model;
  model.layer_dims = std::move(layer_dims);
  model.activations = std::move(activations);
  model.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const std::size_t fan_in = model.layer_dims[l];
    const std::size_t fan_out = model.layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseArray w({fan_out, fan_in});
    for (double& v : w.data) v = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(std::vector<std::size_t>{fan_out});
  }
  return model;
}

void validate(const MlpModel& model) {
  const std::size_t layers = model.weights.size();
  if (model.layer_dims.size() != layers + 1 || model.biases.size() != layers ||
      model.activations.size() != layers) {
    throw DimensionError("MlpModel: inconsistent layer count");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = model.weights[l];
    if (w.rank() != 2 || w.shape[0] != model.layer_dims[l + 1] ||
        w.shape[1] != model.layer_dims[l]) {
      throw DimensionError("MlpModel: weights[" + std::to_string(l) + "] has wrong shape");
    }
    if (model.biases[l].size() != model.layer_dims[l + 1]) {
      throw DimensionError("MlpModel: biases[" + std::to_string(l) + "] has wrong length");
    }
  }
}

void ForwardCache::clear() {
  layer_dims.clear();
  layer_outputs.clear();
  pre_activations.clear();
  input_was_vector = false;
}

MlpGradients MlpGradients::zeros_like(const MlpModel& model) {
  MlpGradients g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.emplace_back(model.weights[l].shape);
    g.biases.emplace_back(model.biases[l].shape);
  }
  return g;
}

void MlpGradients::accumulate(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l].data[i] += other.weights[l].data[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l].data[i] += other.biases[l].data[i];
  }
}

void MlpGradients::scale(double factor) {
  for (auto& w : weights)
    for (double& v : w.data) v *= factor;
  for (auto& b : biases)
    for (double& v : b.data) v *= factor;
  for (double& v : input.data) v *= factor;
}

DenseArray forward(const MlpModel& model, const DenseArray& input, ForwardCache* cache) {
  const bool is_vector = input.rank() == 1;
  if (!is_vector && input.rank() != 2) throw DimensionError("forward: input must be rank 1 or 2");
  const std::size_t width = is_vector ? input.shape[0] : input.shape[1];
  if (width != model.input_width()) {
    throw DimensionError("forward: input width " + std::to_string(width) + " != layer_dims[0] " +
                         std::to_string(model.input_width()));
  }
  const std::size_t batch = is_vector ? 1 : input.shape[0];

  DenseArray current({batch, width}, input.data);
  if (cache) {
    cache->clear();
    cache->layer_dims = model.layer_dims;
    cache->input_was_vector = is_vector;
    cache->layer_outputs.push_back(current);
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.weights[l];
    DenseArray z({batch, w.shape[0]});
    auto zm = as_matrix(z);
    zm.noalias() = as_matrix(current) * as_matrix(w).transpose();
    zm.rowwise() += ConstVecMap(model.biases[l].data.data(),
                                static_cast<Eigen::Index>(model.biases[l].size()));
    if (cache) cache->pre_activations.push_back(z);
    apply_activation(model.activations[l], z);
    if (cache) cache->layer_outputs.push_back(z);
    current = std::move(z);
  }
  if (!current.all_finite()) throw NumericError("forward: non-finite activation");
  if (is_vector) current.shape = {current.shape[1]};
  return current;
}

MlpGradients backward(const MlpModel& model, const ForwardCache& cache,
                      const DenseArray& output_grad) {
  if (cache.empty()) throw UsageError("backward: missing forward cache");
  if (cache.layer_dims != model.layer_dims ||
      cache.layer_outputs.size() != model.num_layers() + 1) {
    throw UsageError("backward: stale forward cache (model changed shape)");
  }
  const std::size_t batch = cache.layer_outputs.front().shape[0];
  if (output_grad.size() != batch * model.output_width()) {
    throw DimensionError("backward: output_grad does not match the cached forward output");
  }

  MlpGradients grads;
  grads.weights.resize(model.num_layers());
  grads.biases.resize(model.num_layers());

  DenseArray delta({batch, model.output_width()}, output_grad.data);
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const DenseArray& out = cache.layer_outputs[l + 1];
    const DenseArray& pre = cache.pre_activations[l];
    switch (model.activations[l]) {
      case Activation::relu:
        for (std::size_t i = 0; i < delta.size(); ++i) {
          if (!(pre.data[i] > 0.0)) delta.data[i] = 0.0;
        }
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < delta.size(); ++i) {
          delta.data[i] *= 1.0 - out.data[i] * out.data[i];
        }
        break;
      case Activation::identity:
        break;
    }
    const DenseArray& in = cache.layer_outputs[l];
    DenseArray gw(model.weights[l].shape);
    as_matrix(gw).noalias() = as_matrix(delta).transpose() * as_matrix(in);
    DenseArray gb(model.biases[l].shape);
    Eigen::Map<Eigen::RowVectorXd>(gb.data.data(), static_cast<Eigen::Index>(gb.size())) =
        as_matrix(delta).colwise().sum();
    grads.weights[l] = std::move(gw);
    grads.biases[l] = std::move(gb);

    DenseArray next({batch, model.layer_dims[l]});
    as_matrix(next).noalias() = as_matrix(delta) * as_matrix(model.weights[l]);
    delta = std::move(next);
  }
  if (cache.input_was_vector) delta.shape = {delta.shape[1]};
  grads.input = std::move(delta);
  return grads;
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 std::int64_t step, const AdamHyper& hyper) {
  if (grads.size() != params.size() || first_moment.size() != params.size() ||
      second_moment.size() != params.size()) {
    throw DimensionError("adam_update: parameter/gradient/moment sizes differ");
  }
  if (step < 1) throw UsageError("adam_update: step must be >= 1");
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_moment[i] = hyper.beta1 * first_moment[i] + (1.0 - hyper.beta1) * g;
    second_moment[i] = hyper.beta2 * second_moment[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = first_moment[i] / c1;
    const double v_hat = second_moment[i] / c2;
    params[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

AdamState make_adam(const MlpModel& model, const AdamHyper& hyper) {
  AdamState state;
  state.lr = hyper.lr;
  state.beta1 = hyper.beta1;
  state.beta2 = hyper.beta2;
  state.epsilon = hyper.epsilon;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    state.first_moment.emplace_back(model.weights[l].shape);
    state.first_moment.emplace_back(model.biases[l].shape);
    state.second_moment.emplace_back(model.weights[l].shape);
    state.second_moment.emplace_back(model.biases[l].shape);
  }
  return state;
}

void adam_step(MlpModel& model, const MlpGradients& grads, AdamState& state) {
  if (grads.weights.size() != model.num_layers() || grads.biases.size() != model.num_layers() ||
      state.first_moment.size() != 2 * model.num_layers()) {
    throw DimensionError("adam_step: gradient/state layer count mismatch");
  }
  const AdamHyper hyper{state.lr, state.beta1, state.beta2, state.epsilon};
  const std::int64_t step = state.step_count + 1;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    adam_update(model.weights[l].data, grads.weights[l].data, state.first_moment[2 * l].data,
                state.second_moment[2 * l].data, step, hyper);
    adam_update(model.biases[l].data, grads.biases[l].data, state.first_moment[2 * l + 1].data,
                state.second_moment[2 * l + 1].data, step, hyper);
  }
  state.step_count = step;
}

}  // namespace usdf
