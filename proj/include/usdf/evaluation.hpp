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

// Reconstruction metrics, uncertainty scores, calibration and the experiment driver.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "usdf/encoder.hpp"
#include "usdf/fusion.hpp"
#include "usdf/mesh.hpp"

namespace usdf {

enum class VoxelSource { from_mesh, from_analytic };

/// Occupancy of the 32^3 voxel centres -0.5 + (i + 0.5) / 32 over [-0.5, 0.5]^3, x fastest.
struct VoxelGrid32 {
  static constexpr int kResolution = 32;
  static constexpr std::size_t kCells = 32 * 32 * 32;

  std::vector<std::uint8_t> occupancy = std::vector<std::uint8_t>(kCells, 0);
  VoxelSource source = VoxelSource::from_analytic;

  static std::size_t index(int i, int j, int k) {
    return (static_cast<std::size_t>(k) * kResolution + j) * kResolution + i;
  }
  static double center(int i) { return -0.5 + (i + 0.5) / kResolution; }
  bool at(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  std::size_t count() const;
};

/// Voxel centre inside the shape (negative SDF).
VoxelGrid32 voxelize(const ShapeSpec& spec);

/// Parity ray casting along +x, +y and +z from every voxel centre with a 2-of-3
/// vote. Rays are offset by a fixed sub-voxel jitter so they avoid mesh edges and
/// vertices. Columns with an odd crossing count (open meshes) are tallied and,
/// when `log` is given, reported there.
VoxelGrid32 voxelize(const TriMesh& mesh, std::ostream* log = nullptr);

/// Ray origin offsets, in voxel units, shared with the reference voxelizer.
inline constexpr double kRayJitterU = 1.3e-4;
inline constexpr double kRayJitterV = 0.7e-4;

/// |a & b| / |a | b|, 1 when both are empty.
double iou(const VoxelGrid32& a, const VoxelGrid32& b);

/// Area-weighted uniform points on the triangles.
std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed);

/// Reference surface of an analytic shape: marching cubes at `resolution` over
/// its conservative SDF, which shares the analytic zero set.
TriMesh reference_mesh(const ShapeSpec& spec, int resolution = 64);

/// Mean nearest-neighbour distance A->B plus B->A, by exhaustive search.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Minimum-cost perfect matching of a square cost matrix (row-major n x n).
/// Returns the column assigned to each row.
std::vector<int> hungarian(std::span<const double> cost, int n);

/// Mean matched Euclidean distance of the optimal one-to-one matching;
/// matched costs are summed in row order. Requires |A| = |B| <= 256.
double emd(std::span<const Vec3> a, std::span<const Vec3> b);
inline constexpr int kEmdMaxPoints = 256;

/// Latent-space scores: same formulas as the training losses, values only.
double score_nll(std::span<const LatentGaussian> preds, std::span<const std::vector<double>> targets);
double score_es(std::span<const LatentGaussian> preds, std::span<const std::vector<double>> targets,
                int samples, std::uint64_t seed);

/// Scalar Gaussians N(mean_i, var_i) against scalar targets.
double score_nll_scalar(std::span<const double> mean, std::span<const double> var,
                        std::span<const double> target);
double score_es_scalar(std::span<const double> mean, std::span<const double> var,
                       std::span<const double> target, int samples, std::uint64_t seed);

struct ScoreSplit {
  double nll = 0.0;
  double es = 0.0;
  std::size_t count = 0;
};

struct SdfSpaceScores {
  ScoreSplit all;
  ScoreSplit surface;      // |gt| <= threshold
  ScoreSplit non_surface;
};

inline constexpr double kSurfaceThreshold = 0.01;

/// Per-point SDF Gaussians (variance floored at kVarFloor) scored against
/// ground-truth SDF values clamped to +-sdf_clamp.
SdfSpaceScores score_sdf_space(std::span<const double> mean, std::span<const double> var,
                               std::span<const double> gt, double sdf_clamp, int samples,
                               std::uint64_t seed, double surface_threshold = kSurfaceThreshold);

/// Standard normal inverse CDF.
double normal_quantile(double p);
/// Half-width x of the central interval, Pr(|X| <= x) = p for X ~ N(0, 1).
double central_quantile(double p);

enum class CalibrationSpace { latent, sdf };
std::string to_string(CalibrationSpace space);

struct CalibrationCurve {
  std::vector<double> probabilities;  // p_t = t / (T + 1), t = 1..T
  std::vector<double> frequencies;
  CalibrationSpace space = CalibrationSpace::latent;
};

inline constexpr int kCalibrationPoints = 20;
inline constexpr std::size_t kMinCalibrationPairs = 100;

/// Coverage of central intervals mean +- Q(p_t) * sigma over independent scalar
/// predictions.
CalibrationCurve calibration_curve(std::span<const double> mean, std::span<const double> sigma,
                                   std::span<const double> target, CalibrationSpace space,
                                   int points = kCalibrationPoints);
/// Latent-space curve: every dimension of every prediction counts as one pair.
CalibrationCurve calibration_curve(std::span<const LatentGaussian> preds,
                                   std::span<const std::vector<double>> targets,
                                   int points = kCalibrationPoints);

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve);

enum class FusionMode { average, bayesian, bayesian_k };
std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& name);

/// Fuses per-view predictions according to `mode`.
LatentGaussian fuse_views(std::span<const LatentGaussian> views, FusionMode mode, int k);

struct ExperimentConfig {
  std::string scenario = "multiview";
  int views = 10;
  double min_scale = 1.0;  // 1 means no crop
  std::vector<FusionMode> modes{FusionMode::average, FusionMode::bayesian, FusionMode::bayesian_k};
  int k = 4;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int mesh_resolution = 32;
  int reference_resolution = 64;
  int chamfer_points = 1024;
  int emd_points = kEmdMaxPoints;
  bool point_metrics = true;
  CameraRing ring;
  RenderOptions render;
};

struct InstanceMetrics {
  int instance_id = 0;
  std::uint64_t seed = 0;
  FusionMode mode = FusionMode::bayesian;
  double iou = 0.0;
  double chamfer = 0.0;  // NaN when the reconstruction has no surface
  double emd = 0.0;      // NaN when the reconstruction has no surface
  double trace = 0.0;    // of the fused latent covariance
};

struct ModeSummary {
  FusionMode mode = FusionMode::bayesian;
  double mean_iou = 0.0;
  double mean_chamfer = 0.0;
  double mean_emd = 0.0;
  std::size_t rows = 0;
  std::size_t empty_surfaces = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<InstanceMetrics> rows;  // sorted by (mode, seed, instance)
  std::vector<ModeSummary> summary;   // one per configured mode, in config order

  const ModeSummary& summary_for(FusionMode mode) const;
};

/// Renders `views` ring views per instance and seed, crops each independently
/// when min_scale < 1, encodes, fuses under every configured mode, meshes the
/// decoded fused mean code and scores it against the analytic shape.
ExperimentReport run_experiment(const DecoderModel& decoder, const EncoderModel& encoder,
                                const std::vector<ShapeSpec>& instances,
                                const ExperimentConfig& config, std::ostream* log = nullptr);

/// Column order: scenario,min_scale,mode,k,seed,instance_id,iou,chamfer,emd,trace
void write_instance_csv(std::ostream& out, const ExperimentReport& report);
/// Multi-view table: method,iou,chamfer,emd
void write_method_table_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);
/// Crop sweep table: method then one IoU column per min_scale, in report order.
void write_min_scale_table_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);
/// Surface/non-surface/all table: method,split,nll,es,count
void write_sdf_scores_csv(std::ostream& out, const std::vector<std::string>& methods,
                          const std::vector<SdfSpaceScores>& scores);

std::string method_label(FusionMode mode, int k);

}  // namespace usdf
