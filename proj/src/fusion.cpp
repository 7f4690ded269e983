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

#include "usdf/fusion.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace usdf {
namespace {

void check_observations(std::span<const LatentGaussian> obs) {
  if (obs.empty()) throw UsageError("fusion: no observations");
  const std::size_t dim = obs.front().dim();
  for (const auto& g : obs) {
    if (g.mean.size() != dim || g.var.size() != dim) {
      throw UsageError("fusion: observations have different latent dimensions");
    }
  }
}

}  // namespace

FusionState::FusionState(std::size_t dim) : precision_(dim, 0.0), weighted_mean_(dim, 0.0) {}

void FusionState::add(const LatentGaussian& observation) {
  if (log_.empty() && precision_.empty()) {
    precision_.assign(observation.dim(), 0.0);
    weighted_mean_.assign(observation.dim(), 0.0);
  }
  if (observation.mean.size() != precision_.size() || observation.var.size() != precision_.size()) {
    throw DimensionError("FusionState::add: latent dimension mismatch");
  }
  for (std::size_t d = 0; d < precision_.size(); ++d) {
    const double p = 1.0 / std::max(observation.var[d], kFusionVarFloor);
    precision_[d] += p;
    weighted_mean_[d] += p * observation.mean[d];
  }
  log_.push_back(observation);
}

LatentGaussian FusionState::posterior() const {
  if (log_.empty()) throw UsageError("FusionState::posterior: no observations yet");
  LatentGaussian g;
  g.mean.resize(precision_.size());
  g.var.resize(precision_.size());
  for (std::size_t d = 0; d < precision_.size(); ++d) {
    g.var[d] = 1.0 / precision_[d];
    g.mean[d] = weighted_mean_[d] / precision_[d];
  }
  return g;
}

FusionState fuse_incremental(FusionState state, const LatentGaussian& observation) {
  state.add(observation);
  return state;
}

LatentGaussian fuse(std::span<const LatentGaussian> observations) {
  check_observations(observations);
  FusionState state(observations.front().dim());
  for (const auto& g : observations) state.add(g);
  return state.posterior();
}

LatentGaussian fuse_average(std::span<const LatentGaussian> observations) {
  check_observations(observations);
  const std::size_t dim = observations.front().dim();
  const double n = static_cast<double>(observations.size());
  LatentGaussian g;
  g.mean.assign(dim, 0.0);
  g.var.assign(dim, 0.0);
  for (const auto& o : observations) {
    for (std::size_t d = 0; d < dim; ++d) {
      g.mean[d] += o.mean[d];
      g.var[d] += o.var[d];
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    g.mean[d] /= n;
    g.var[d] /= n * n;
  }
  return g;
}

SelectionResult select_bayesian_k(std::span<const LatentGaussian> observations, int k) {
  check_observations(observations);
  if (k < 1 || static_cast<std::size_t>(k) > observations.size()) {
    throw UsageError("select_bayesian_k: K must lie in [1, " + std::to_string(observations.size()) +
                     "]");
  }
  std::vector<std::size_t> order(observations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> traces(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) traces[i] = observations[i].trace();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return traces[a] < traces[b]; });
  order.resize(static_cast<std::size_t>(k));

  // Fuse in view order so K = N reproduces plain fusion bit for bit.
  std::vector<std::size_t> by_index = order;
  std::sort(by_index.begin(), by_index.end());
  std::vector<LatentGaussian> chosen;
  for (std::size_t i : by_index) chosen.push_back(observations[i]);
  return {order, fuse(chosen)};
}

void write_fusion_trace(std::ostream& out, std::span<const LatentGaussian> observations,
                        const std::vector<std::size_t>& selected) {
  check_observations(observations);
  out << "view_index,trace,selected,posterior_trace\n";
  out << std::setprecision(17);
  FusionState state(observations.front().dim());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    state.add(observations[i]);
    const bool is_selected = std::find(selected.begin(), selected.end(), i) != selected.end();
    out << i << ',' << observations[i].trace() << ',' << (is_selected ? 1 : 0) << ','
        << state.posterior().trace() << '\n';
  }
}

}  // namespace usdf
