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

// Multi-view fusion of latent Gaussians in precision space.

#include <iosfwd>
#include <span>
#include <vector>

#include "usdf/encoder.hpp"

namespace usdf {

/// Inputs are floored at this variance before inversion.
inline constexpr double kFusionVarFloor = 1e-12;

/// Precision-weighted product of diagonal Gaussians:
/// var = 1 / sum(1/var_i), mean = var * sum(mean_i / var_i). Throws UsageError on
/// an empty list or mixed dimensions.
LatentGaussian fuse(std::span<const LatentGaussian> observations);

/// Equal-weight mean of the observation means. The variance reported is that of
/// the average of independent estimates, sum(var_i) / N^2.
LatentGaussian fuse_average(std::span<const LatentGaussian> observations);

/// Running fusion with the per-view log retained for post-hoc re-selection.
class FusionState {
 public:
  FusionState() = default;
  explicit FusionState(std::size_t dim);

  void add(const LatentGaussian& observation);
  LatentGaussian posterior() const;

  std::size_t view_count() const { return log_.size(); }
  std::size_t dim() const { return precision_.size(); }
  const std::vector<LatentGaussian>& log() const { return log_; }
  const std::vector<double>& precision() const { return precision_; }
  const std::vector<double>& weighted_mean() const { return weighted_mean_; }

 private:
  std::vector<double> precision_;
  std::vector<double> weighted_mean_;
  std::vector<LatentGaussian> log_;
};

/// Functional form of FusionState::add.
FusionState fuse_incremental(FusionState state, const LatentGaussian& observation);

struct SelectionResult {
  std::vector<std::size_t> selected;  // indices into the input, ascending trace order
  LatentGaussian fused;
};

/// Keeps the K observations with the smallest covariance trace (ties go to the
/// earlier index) and fuses them.
SelectionResult select_bayesian_k(std::span<const LatentGaussian> observations, int k);

/// CSV: view_index,trace,selected,posterior_trace. posterior_trace is the trace
/// of the running Bayesian posterior after adding views 0..view_index.
void write_fusion_trace(std::ostream& out, std::span<const LatentGaussian> observations,
                        const std::vector<std::size_t>& selected);

}  // namespace usdf
