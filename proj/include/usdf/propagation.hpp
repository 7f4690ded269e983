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

// Monte-Carlo propagation of latent uncertainty through a decoder.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "usdf/decoder.hpp"
#include "usdf/encoder.hpp"

namespace usdf {

/// Anything that maps (code, points) to SDF values. Implementations must be
/// safe to call concurrently.
class LatentField {
 public:
  virtual ~LatentField() = default;
  virtual int latent_dim() const = 0;
  virtual void decode(std::span<const double> code, std::span<const Vec3> points,
                      std::span<double> out) const = 0;
};

class DecoderField final : public LatentField {
 public:
  explicit DecoderField(const DecoderModel& model) : model_(&model) {}
  int latent_dim() const override { return model_->latent_dim; }
  void decode(std::span<const double> code, std::span<const Vec3> points,
              std::span<double> out) const override;

 private:
  const DecoderModel* model_;
};

/// Single-pass running mean / variance.
struct Welford {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  /// Unbiased (count - 1) sample variance.
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct PointMoments {
  std::vector<double> mean;
  std::vector<double> var;  // unbiased sample variance
};

/// Draws M codes z_m ~ N(mu, diag(var)) once and shares them across all points.
std::vector<std::vector<double>> sample_codes(const LatentGaussian& latent, int samples,
                                              std::uint64_t seed);

/// Per-point sample mean and (M-1)-normalised variance. Points are processed in
/// independent chunks in parallel; each chunk streams the M decodes through
/// Welford accumulators.
PointMoments propagate_points(const LatentField& field, const LatentGaussian& latent,
                              std::span<const Vec3> points, int samples, std::uint64_t seed);

/// Lattice over [-0.5, 0.5]^3 with R points per axis (spacing 1/(R-1)), x fastest.
std::vector<Vec3> lattice_points(int resolution);

struct UncertainSdfGrid {
  int resolution = 0;
  double origin = -0.5;
  double spacing = 0.0;
  int sample_count = 0;
  std::vector<double> mean;
  std::vector<double> var;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
};

UncertainSdfGrid propagate_grid(const LatentField& field, const LatentGaussian& latent,
                                int resolution, int samples, std::uint64_t seed);

/// Decoded SDF of a single code on the lattice (the deterministic mean-code field).
std::vector<double> decode_grid(const LatentField& field, std::span<const double> code,
                                int resolution);

/// Per-vertex standard deviation sqrt(var).
std::vector<double> propagate_vertices(const LatentField& field, const LatentGaussian& latent,
                                       std::span<const Vec3> vertices, int samples,
                                       std::uint64_t seed);

struct SdfHistogram {
  Vec3 point = Vec3::Zero();
  std::vector<double> samples;
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<int> counts;
};

SdfHistogram sdf_histogram(const LatentField& field, const LatentGaussian& latent,
                           const Vec3& point, int samples, int bins, std::uint64_t seed);

/// Number of strict local maxima after a centred moving average of `window` bins.
int count_modes(const std::vector<int>& counts, int window = 5);

/// Binary: "USDFGRID" magic, u32 version, u32 R, f64 origin, f64 spacing,
/// u32 M, then R^3 f64 means and R^3 f64 variances, all little-endian.
void save_grid(const std::filesystem::path& path, const UncertainSdfGrid& grid);
UncertainSdfGrid load_grid(const std::filesystem::path& path);

/// CSV: bin_lo,bin_hi,count followed by nothing else; samples are not written.
void write_histogram_csv(std::ostream& out, const SdfHistogram& hist);

}  // namespace usdf
