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

#include "usdf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "ray_cast.hpp"

namespace usdf {

std::size_t VoxelGrid32::count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

VoxelGrid32 voxelize(const ShapeSpec& spec) {
  validate(spec);
  constexpr int n = VoxelGrid32::kResolution;
  VoxelGrid32 grid;
  grid.source = VoxelSource::from_analytic;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 p(VoxelGrid32::center(i), VoxelGrid32::center(j), VoxelGrid32::center(k));
        grid.occupancy[VoxelGrid32::index(i, j, k)] = gauge(spec, p) < 1.0 ? 1 : 0;
      }
  return grid;
}

VoxelGrid32 voxelize(const TriMesh& mesh, std::ostream* log) {
  validate(mesh);
  constexpr int n = VoxelGrid32::kResolution;
  const double h = 1.0 / n;
  VoxelGrid32 grid;
  grid.source = VoxelSource::from_mesh;
  if (mesh.triangles.empty()) return grid;

  std::vector<std::uint8_t> votes(VoxelGrid32::kCells, 0);
  std::size_t odd_columns = 0;
  for (int axis = 0; axis < 3; ++axis) {
    int u = 0;
    int v = 0;
    ray_cast::plane_axes(axis, u, v);
    // Bucket triangles by the columns their projected bounding box covers.
    std::vector<std::vector<std::int32_t>> buckets(static_cast<std::size_t>(n) * n);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      double lo[2] = {1e300, 1e300};
      double hi[2] = {-1e300, -1e300};
      for (auto idx : tri) {
        const Vec3& p = mesh.vertices[idx];
        lo[0] = std::min(lo[0], p[u]);
        hi[0] = std::max(hi[0], p[u]);
        lo[1] = std::min(lo[1], p[v]);
        hi[1] = std::max(hi[1], p[v]);
      }
      const int c0 = std::max(0, static_cast<int>(std::floor((lo[0] + 0.5) / h - 0.5)));
      const int c1 = std::min(n - 1, static_cast<int>(std::ceil((hi[0] + 0.5) / h - 0.5)));
      const int r0 = std::max(0, static_cast<int>(std::floor((lo[1] + 0.5) / h - 0.5)));
      const int r1 = std::min(n - 1, static_cast<int>(std::ceil((hi[1] + 0.5) / h - 0.5)));
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) buckets[static_cast<std::size_t>(r) * n + c].push_back(static_cast<std::int32_t>(t));
    }

    std::size_t odd = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : odd)
    for (int col = 0; col < n * n; ++col) {
      const int cu = col % n;
      const int cv = col / n;
      const double pu = VoxelGrid32::center(cu) + kRayJitterU * h;
      const double pv = VoxelGrid32::center(cv) + kRayJitterV * h;
      std::vector<double> hits;
      for (auto t : buckets[col]) {
        const auto& tri = mesh.triangles[t];
        double height = 0.0;
        if (ray_cast::crosses(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]],
                              axis, pu, pv, height)) {
          hits.push_back(height);
        }
      }
      if (hits.size() % 2 != 0) ++odd;
      std::sort(hits.begin(), hits.end());
      std::size_t above = 0;  // hits strictly above the current centre, scanning downward
      std::size_t next = hits.size();
      for (int w = n - 1; w >= 0; --w) {
        const double c = VoxelGrid32::center(w);
        while (next > 0 && hits[next - 1] > c) {
          --next;
          ++above;
        }
        if (above % 2 == 1) {
          int idx[3];
          idx[axis] = w;
          idx[u] = cu;
          idx[v] = cv;
          votes[VoxelGrid32::index(idx[0], idx[1], idx[2])] += 1;
        }
      }
    }
    odd_columns += odd;
  }
  for (std::size_t i = 0; i < votes.size(); ++i) grid.occupancy[i] = votes[i] >= 2 ? 1 : 0;
  if (odd_columns > 0 && log) {
    *log << "voxelize: " << odd_columns << " ray columns crossed the mesh an odd number of times"
         << " (mesh not closed); using the 2-of-3 vote\n";
  }
  return grid;
}

double iou(const VoxelGrid32& a, const VoxelGrid32& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < VoxelGrid32::kCells; ++i) {
    inter += (a.occupancy[i] && b.occupancy[i]) ? 1 : 0;
    uni += (a.occupancy[i] || b.occupancy[i]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed) {
  validate(mesh);
  if (count < 0) throw UsageError("sample_surface: negative count");
  if (mesh.triangles.empty()) throw UsageError("sample_surface: mesh has no triangles");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    total += triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    cumulative[t] = total;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    const double pick = unit(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                cumulative.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    points.push_back((1.0 - r1) * mesh.vertices[tri[0]] + r1 * (1.0 - r2) * mesh.vertices[tri[1]] +
                     r1 * r2 * mesh.vertices[tri[2]]);
  }
  return points;
}

TriMesh reference_mesh(const ShapeSpec& spec, int resolution) {
  validate(spec);
  const auto pts = lattice_points(resolution);
  std::vector<double> values(pts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pts.size()); ++i) {
    values[i] = conservative_sdf(spec, pts[i]);
  }
  return marching_cubes(unit_grid(values, resolution));
}

namespace {

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  std::vector<double> d(from.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(from.size()); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (from[i] - q).squaredNorm());
    d[i] = std::sqrt(best);
  }
  return d;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw UsageError("chamfer: point sets must be nonempty");
  return mean_of(nearest_distances(a, b)) + mean_of(nearest_distances(b, a));
}

std::vector<int> hungarian(std::span<const double> cost, int n) {
  if (n < 0 || cost.size() != static_cast<std::size_t>(n) * n) {
    throw DimensionError("hungarian: cost matrix must be n x n");
  }
  // Shortest augmenting paths with row/column potentials; 1-based, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - row_pot[i0] - col_pot[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[match[j]] += delta;
          col_pot[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double emd(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw UsageError("emd: point sets must have equal sizes");
  if (a.size() > static_cast<std::size_t>(kEmdMaxPoints)) {
    throw UsageError("emd: at most " + std::to_string(kEmdMaxPoints) + " points");
  }
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = (a[i] - b[j]).norm();
  const auto assignment = hungarian(cost, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + assignment[i]];
  return total / n;
}

double score_nll(std::span<const LatentGaussian> preds, std::span<const std::vector<double>> targets) {
  return nll_loss(preds, targets).value;
}

double score_es(std::span<const LatentGaussian> preds, std::span<const std::vector<double>> targets,
                int samples, std::uint64_t seed) {
  return energy_score_loss(preds, targets, samples, seed).value;
}

namespace {

void check_scalar(std::span<const double> mean, std::span<const double> var,
                  std::span<const double> target) {
  if (mean.size() != var.size() || mean.size() != target.size()) {
    throw DimensionError("scoring: mean, variance and target lengths differ");
  }
  if (mean.empty()) throw UsageError("scoring: no predictions");
}

double point_nll(double mean, double var, double target) {
  const double err = mean - target;
  return 0.5 * (err * err / var + std::log(var));
}

// Per-point energy score with one shared normal stream consumed in point order.
std::vector<double> point_es(std::span<const double> mean, std::span<const double> var,
                             std::span<const double> target, int samples, std::uint64_t seed) {
  if (samples < 2) throw UsageError("energy score: need at least two samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(mean.size());
  std::vector<double> z(static_cast<std::size_t>(samples));
  const double w_pair = 1.0 / (2.0 * (samples - 1));
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sd = std::sqrt(var[i]);
    for (auto& x : z) x = mean[i] + sd * normal(rng);
    double first = 0.0;
    for (double x : z) first += std::abs(x - target[i]);
    double pair = 0.0;
    for (int m = 0; m + 1 < samples; ++m) pair += std::abs(z[m] - z[m + 1]);
    out[i] = first / samples - w_pair * pair;
  }
  return out;
}

}  // namespace

double score_nll_scalar(std::span<const double> mean, std::span<const double> var,
                        std::span<const double> target) {
  check_scalar(mean, var, target);
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) total += point_nll(mean[i], var[i], target[i]);
  return total / static_cast<double>(mean.size());
}

double score_es_scalar(std::span<const double> mean, std::span<const double> var,
                       std::span<const double> target, int samples, std::uint64_t seed) {
  check_scalar(mean, var, target);
  const auto es = point_es(mean, var, target, samples, seed);
  return mean_of(es);
}

SdfSpaceScores score_sdf_space(std::span<const double> mean, std::span<const double> var,
                               std::span<const double> gt, double sdf_clamp, int samples,
                               std::uint64_t seed, double surface_threshold) {
  check_scalar(mean, var, gt);
  const std::size_t n = mean.size();
  std::vector<double> v(n), target(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::max(var[i], kVarFloor);
    target[i] = std::clamp(gt[i], -sdf_clamp, sdf_clamp);
  }
  const auto es = point_es(mean, v, target, samples, seed);
  SdfSpaceScores s;
  auto add = [](ScoreSplit& split, double nll, double e) {
    split.nll += nll;
    split.es += e;
    split.count += 1;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double nll = point_nll(mean[i], v[i], target[i]);
    add(s.all, nll, es[i]);
    add(std::abs(gt[i]) <= surface_threshold ? s.surface : s.non_surface, nll, es[i]);
  }
  for (ScoreSplit* split : {&s.all, &s.surface, &s.non_surface}) {
    if (split->count == 0) {
      split->nll = split->es = std::numeric_limits<double>::quiet_NaN();
    } else {
      split->nll /= static_cast<double>(split->count);
      split->es /= static_cast<double>(split->count);
    }
  }
  return s;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step on erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double central_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("central_quantile: p must lie in (0, 1)");
  return normal_quantile(0.5 * (1.0 + p));
}

std::string to_string(CalibrationSpace space) {
  return space == CalibrationSpace::latent ? "latent" : "sdf";
}

CalibrationCurve calibration_curve(std::span<const double> mean, std::span<const double> sigma,
                                   std::span<const double> target, CalibrationSpace space,
                                   int points) {
  if (mean.size() != sigma.size() || mean.size() != target.size()) {
    throw DimensionError("calibration_curve: mean, sigma and target lengths differ");
  }
  if (mean.size() < kMinCalibrationPairs) {
    throw UsageError("calibration_curve: need at least " + std::to_string(kMinCalibrationPairs) +
                     " prediction/target pairs, got " + std::to_string(mean.size()));
  }
  if (points < 1) throw UsageError("calibration_curve: need at least one probability level");
  std::vector<double> err(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) err[i] = std::abs(target[i] - mean[i]);
  CalibrationCurve curve;
  curve.space = space;
  for (int t = 1; t <= points; ++t) {
    const double p = static_cast<double>(t) / (points + 1);
    const double q = central_quantile(p);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < err.size(); ++i) covered += err[i] <= q * sigma[i] ? 1 : 0;
    curve.probabilities.push_back(p);
    curve.frequencies.push_back(static_cast<double>(covered) / static_cast<double>(err.size()));
  }
  return curve;
}

CalibrationCurve calibration_curve(std::span<const LatentGaussian> preds,
                                   std::span<const std::vector<double>> targets, int points) {
  if (preds.size() != targets.size()) throw DimensionError("calibration_curve: length mismatch");
  std::vector<double> mean, sigma, target;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (targets[i].size() != preds[i].dim()) throw DimensionError("calibration_curve: dim mismatch");
    for (std::size_t d = 0; d < preds[i].dim(); ++d) {
      mean.push_back(preds[i].mean[d]);
      sigma.push_back(std::sqrt(preds[i].var[d]));
      target.push_back(targets[i][d]);
    }
  }
  return calibration_curve(mean, sigma, target, CalibrationSpace::latent, points);
}

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve) {
  out << "p_t,F_t\n" << std::setprecision(10);
  for (std::size_t t = 0; t < curve.probabilities.size(); ++t) {
    out << curve.probabilities[t] << ',' << curve.frequencies[t] << '\n';
  }
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::average: return "average";
    case FusionMode::bayesian: return "bayesian";
    case FusionMode::bayesian_k: return "bayesian-k";
  }
  return "?";
}

FusionMode fusion_mode_from_string(const std::string& name) {
  if (name == "average") return FusionMode::average;
  if (name == "bayesian") return FusionMode::bayesian;
  if (name == "bayesian-k" || name == "bayesian_k") return FusionMode::bayesian_k;
  throw UsageError("unknown fusion mode '" + name + "' (expected average, bayesian or bayesian-k)");
}

std::string method_label(FusionMode mode, int k) {
  switch (mode) {
    case FusionMode::average: return "Average";
    case FusionMode::bayesian: return "Bayesian";
    case FusionMode::bayesian_k: return "Bayesian-" + std::to_string(k);
  }
  return "?";
}

LatentGaussian fuse_views(std::span<const LatentGaussian> views, FusionMode mode, int k) {
  switch (mode) {
    case FusionMode::average: return fuse_average(views);
    case FusionMode::bayesian: return fuse(views);
    case FusionMode::bayesian_k:
      if (k < 1) throw UsageError("fuse_views: K must be >= 1");
      return select_bayesian_k(views, std::min<int>(k, static_cast<int>(views.size()))).fused;
  }
  throw UsageError("fuse_views: unknown mode");
}

const ModeSummary& ExperimentReport::summary_for(FusionMode mode) const {
  for (const auto& s : summary) {
    if (s.mode == mode) return s;
  }
  throw UsageError("experiment report has no rows for mode " + to_string(mode));
}

ExperimentReport run_experiment(const DecoderModel& decoder, const EncoderModel& encoder,
                                const std::vector<ShapeSpec>& instances,
                                const ExperimentConfig& config, std::ostream* log) {
  if (instances.empty()) throw UsageError("run_experiment: no instances");
  if (config.views < 1) throw UsageError("run_experiment: views must be >= 1");
  if (!(config.min_scale > 0.0 && config.min_scale <= 1.0)) {
    throw UsageError("run_experiment: min_scale must lie in (0, 1]");
  }
  if (config.modes.empty() || config.seeds.empty()) {
    throw UsageError("run_experiment: need at least one fusion mode and one seed");
  }
  if (encoder.latent_dim != decoder.latent_dim) {
    throw DimensionError("run_experiment: encoder and decoder latent dimensions differ");
  }
  const DecoderField field(decoder);
  struct Reference {
    VoxelGrid32 voxels;
    TriMesh mesh;
  };
  std::map<int, Reference> refs;
  for (const auto& spec : instances) {
    Reference r{voxelize(spec), config.point_metrics ? reference_mesh(spec, config.reference_resolution)
                                                     : TriMesh{}};
    refs.emplace(spec.instance_id, std::move(r));
  }

  ExperimentReport report;
  report.config = config;
  for (std::uint64_t seed : config.seeds) {
    const std::uint64_t run_seed = derive_seed(seed, "experiment");
    for (const auto& spec : instances) {
      const auto cameras = ring_cameras(spec.instance_id, config.views, config.ring, run_seed);
      std::vector<LatentGaussian> preds;
      for (int v = 0; v < config.views; ++v) {
        ViewObservation view = render_view(spec, cameras[v], config.render);
        view.instance_id = spec.instance_id;
        if (config.min_scale < 1.0) {
          const auto crop_seed = derive_seed(derive_seed(run_seed, "crop"),
                                             static_cast<std::uint64_t>(spec.instance_id) * 1000 + v);
          view = corrupt_crop(view, config.min_scale, crop_seed);
        }
        preds.push_back(encode(encoder, view));
      }
      const Reference& ref = refs.at(spec.instance_id);
      for (FusionMode mode : config.modes) {
        const LatentGaussian fused = fuse_views(preds, mode, config.k);
        const auto values = decode_grid(field, fused.mean, config.mesh_resolution);
        const TriMesh mesh = marching_cubes(unit_grid(values, config.mesh_resolution));
        InstanceMetrics row;
        row.instance_id = spec.instance_id;
        row.seed = seed;
        row.mode = mode;
        row.iou = iou(voxelize(mesh), ref.voxels);
        row.trace = fused.trace();
        row.chamfer = row.emd = std::numeric_limits<double>::quiet_NaN();
        if (config.point_metrics && !mesh.triangles.empty() && !ref.mesh.triangles.empty()) {
          const std::uint64_t ps = derive_seed(run_seed, static_cast<std::uint64_t>(spec.instance_id));
          const auto a = sample_surface(mesh, config.chamfer_points, derive_seed(ps, "cd_rec"));
          const auto b = sample_surface(ref.mesh, config.chamfer_points, derive_seed(ps, "cd_ref"));
          row.chamfer = chamfer(a, b);
          const auto ea = sample_surface(mesh, config.emd_points, derive_seed(ps, "emd_rec"));
          const auto eb = sample_surface(ref.mesh, config.emd_points, derive_seed(ps, "emd_ref"));
          row.emd = emd(ea, eb);
        }
        report.rows.push_back(row);
      }
    }
    if (log) *log << "experiment seed " << seed << " done\n";
  }

  auto mode_rank = [&](FusionMode m) {
    return std::find(config.modes.begin(), config.modes.end(), m) - config.modes.begin();
  };
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [&](const InstanceMetrics& a, const InstanceMetrics& b) {
                     if (mode_rank(a.mode) != mode_rank(b.mode)) return mode_rank(a.mode) < mode_rank(b.mode);
                     if (a.seed != b.seed) return a.seed < b.seed;
                     return a.instance_id < b.instance_id;
                   });
  for (FusionMode mode : config.modes) {
    ModeSummary s;
    s.mode = mode;
    std::size_t point_rows = 0;
    for (const auto& r : report.rows) {
      if (r.mode != mode) continue;
      ++s.rows;
      s.mean_iou += r.iou;
      if (std::isnan(r.chamfer)) {
        ++s.empty_surfaces;
        continue;
      }
      ++point_rows;
      s.mean_chamfer += r.chamfer;
      s.mean_emd += r.emd;
    }
    s.mean_iou /= static_cast<double>(s.rows);
    if (point_rows > 0) {
      s.mean_chamfer /= static_cast<double>(point_rows);
      s.mean_emd /= static_cast<double>(point_rows);
    } else {
      s.mean_chamfer = s.mean_emd = std::numeric_limits<double>::quiet_NaN();
    }
    report.summary.push_back(s);
  }
  return report;
}

void write_instance_csv(std::ostream& out, const ExperimentReport& report) {
  out << "scenario,min_scale,mode,k,seed,instance_id,iou,chamfer,emd,trace\n" << std::setprecision(10);
  for (const auto& r : report.rows) {
    out << report.config.scenario << ',' << report.config.min_scale << ',' << to_string(r.mode) << ','
        << report.config.k << ',' << r.seed << ',' << r.instance_id << ',' << r.iou << ','
        << r.chamfer << ',' << r.emd << ',' << r.trace << '\n';
  }
}

void write_method_table_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "method,iou,chamfer,emd\n" << std::setprecision(10);
  std::vector<std::string> seen;
  for (const auto& rep : reports) {
    for (const auto& s : rep.summary) {
      const std::string label = method_label(s.mode, rep.config.k);
      if (std::find(seen.begin(), seen.end(), label) != seen.end()) continue;
      seen.push_back(label);
      out << label << ',' << s.mean_iou << ',' << s.mean_chamfer << ',' << s.mean_emd << '\n';
    }
  }
}

void write_min_scale_table_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << "method";
  for (const auto& rep : reports) out << ",min_scale_" << rep.config.min_scale;
  out << '\n' << std::setprecision(10);
  if (reports.empty()) return;
  for (const auto& s : reports.front().summary) {
    out << method_label(s.mode, reports.front().config.k);
    for (const auto& rep : reports) out << ',' << rep.summary_for(s.mode).mean_iou;
    out << '\n';
  }
}

void write_sdf_scores_csv(std::ostream& out, const std::vector<std::string>& methods,
                          const std::vector<SdfSpaceScores>& scores) {
  if (methods.size() != scores.size()) throw DimensionError("write_sdf_scores_csv: length mismatch");
  out << "method,split,nll,es,count\n" << std::setprecision(10);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::pair<const char*, const ScoreSplit*> splits[] = {
        {"all", &scores[m].all}, {"surface", &scores[m].surface}, {"non_surface", &scores[m].non_surface}};
    for (const auto& [name, s] : splits) {
      out << methods[m] << ',' << name << ',' << s->nll << ',' << s->es << ',' << s->count << '\n';
    }
  }
}

}  // namespace usdf
