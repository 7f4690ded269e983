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

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "reference.hpp"
#include "test_util.hpp"
#include "usdf/evaluation.hpp"

using namespace usdf;
using usdf::test::rel_err;

namespace {

std::vector<double> sdf_grid(const ShapeSpec& s, int r) {
  std::vector<double> v;
  for (const auto& p : lattice_points(r)) v.push_back(analytic_sdf(s, p));
  return v;
}

TriMesh shape_mesh(const ShapeSpec& s, int r) {
  const auto v = sdf_grid(s, r);
  return marching_cubes(unit_grid(v, r));
}

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

double erf_coverage(double x) { return std::erf(x / std::numbers::sqrt2); }

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

// Small decoder that knows two shapes, and an encoder whose mean head sits on
// the first shape's code with a view-dependent variance.
struct Models {
  std::vector<ShapeSpec> shapes;
  DecoderModel decoder;
  EncoderModel encoder;
};

const Models& models() {
  static const Models m = [] {
    Models out;
    out.shapes = {make_sphere(0.3, 0), ShapeSpec{ShapeFamily::superellipsoid, {0.35, 0.25, 0.3}, 3.0, 1}};
    std::vector<std::vector<SdfSample>> samples;
    for (const auto& s : out.shapes) samples.push_back(sample_training_points(s, 384, 128, 0.02, s.instance_id));
    DecoderTrainConfig dc;
    dc.latent_dim = 4;
    dc.hidden = {48, 48};
    dc.epochs = 200;
    dc.points_per_shape = 512;
    dc.batch_size = 128;
    dc.lr_weights = 2e-3;
    dc.lr_codes = 2e-3;
    dc.seed = 1;
    const auto trained = train_decoder(out.shapes, samples, dc);
    out.decoder = trained.model;
    out.encoder = make_encoder(4, 32, 32, {8}, 2);
    auto& last_w = out.encoder.mlp.weights.back();
    auto& last_b = out.encoder.mlp.biases.back();
    for (double& w : last_w.data) w *= 0.05;
    for (std::size_t d = 0; d < 4; ++d) {
      last_b.data[d] = trained.codebook.codes[0][d];
      last_b.data[4 + d] = std::log(1e-3);
    }
    return out;
  }();
  return m;
}

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.views = 4;
  c.k = 2;
  c.seeds = {0, 1};
  c.mesh_resolution = 20;
  c.reference_resolution = 24;
  c.chamfer_points = 128;
  c.emd_points = 32;
  return c;
}

}  // namespace

TEST_CASE("analytic sphere voxel count") {
  const VoxelGrid32 g = voxelize(make_sphere(0.3));
  CHECK(g.source == VoxelSource::from_analytic);
  const double expected = 4.0 / 3.0 * std::numbers::pi * 0.027 * 32 * 32 * 32;
  CHECK(std::abs(static_cast<double>(g.count()) - expected) <= 0.03 * expected);
}

TEST_CASE("empty mesh voxelizes to nothing") {
  const VoxelGrid32 g = voxelize(TriMesh{});
  CHECK(g.count() == 0);
  CHECK(g.source == VoxelSource::from_mesh);
  CHECK(iou(g, g) == 1.0);
}

TEST_CASE("mesh voxelization agrees with the analytic shape") {
  const ShapeSpec s = make_sphere(0.3);
  CHECK(iou(voxelize(shape_mesh(s, 64)), voxelize(s)) >= 0.95);
  CHECK(iou(voxelize(reference_mesh(s, 64)), voxelize(s)) >= 0.95);
  for (const auto& spec : make_family(3, 8)) {
    CHECK(iou(voxelize(reference_mesh(spec, 48)), voxelize(spec)) >= 0.9);
  }
}

TEST_CASE("ray-cast voxelizer equals the brute-force reference") {
  ShapeSpec s;
  s.half_extents = {0.33, 0.21, 0.27};
  s.exponent = 4.5;
  for (const TriMesh& m : {shape_mesh(make_sphere(0.28), 14), shape_mesh(s, 16)}) {
    const VoxelGrid32 a = voxelize(m);
    const VoxelGrid32 b = reference::voxelize_brute_force(m);
    CHECK(a.occupancy == b.occupancy);
  }
}

TEST_CASE("open meshes are reported") {
  TriMesh m;
  m.vertices = {Vec3(-0.4, -0.4, 0.01), Vec3(0.4, -0.4, 0.01), Vec3(0.0, 0.4, 0.01)};
  m.triangles = {{0, 1, 2}};
  std::ostringstream log;
  voxelize(m, &log);
  CHECK_FALSE(log.str().empty());
}

TEST_CASE("IoU hand cases") {
  VoxelGrid32 a, b;
  a.occupancy[0] = a.occupancy[1] = a.occupancy[2] = 1;
  b.occupancy[1] = b.occupancy[2] = b.occupancy[3] = 1;
  CHECK(iou(a, b) == 0.5);
  CHECK(iou(b, a) == 0.5);
  CHECK(iou(a, a) == 1.0);
  VoxelGrid32 c;
  c.occupancy[100] = 1;
  CHECK(iou(a, c) == 0.0);
  CHECK(VoxelGrid32::center(0) == -0.5 + 0.5 / 32);
  CHECK(a.at(1, 0, 0));
}

TEST_CASE("chamfer distance") {
  const std::vector<Vec3> one{Vec3::Zero()};
  const std::vector<Vec3> other{Vec3::UnitX()};
  CHECK(chamfer(one, other) == 2.0);
  const auto a = random_points(300, 1);
  const auto b = random_points(200, 2);
  CHECK(chamfer(a, a) == 0.0);
  CHECK(chamfer(a, b) == chamfer(b, a));
  CHECK(std::abs(chamfer(a, b) - reference::chamfer_kdtree(a, b)) < 1e-9);
  const auto big_a = random_points(1024, 3);
  const auto big_b = random_points(1024, 4);
  CHECK(std::abs(chamfer(big_a, big_b) - reference::chamfer_kdtree(big_a, big_b)) < 1e-9);
  CHECK_THROWS_AS(chamfer({}, a), UsageError);
}

TEST_CASE("earth mover's distance") {
  const std::vector<Vec3> a{Vec3::Zero(), Vec3::UnitX()};
  const std::vector<Vec3> b{Vec3::UnitX(), Vec3::Zero()};
  CHECK(emd(a, b) == 0.0);
  CHECK(emd(a, a) == 0.0);
  for (int n = 1; n <= 7; ++n) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = random_points(n, 10 * n + seed);
      const auto q = random_points(n, 100 * n + seed);
      CAPTURE(n);
      CHECK(emd(p, q) == reference::emd_brute_force(p, q));
      CHECK(emd(p, q) >= 0.0);
    }
  }
  const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  CHECK(hungarian(cost, 3) == std::vector<int>{1, 0, 2});
  CHECK_THROWS_AS(emd(random_points(3, 1), random_points(4, 2)), UsageError);
  CHECK_THROWS_AS(emd(random_points(257, 1), random_points(257, 2)), UsageError);
  const auto full_a = random_points(256, 5);
  const auto full_b = random_points(256, 6);
  CHECK(std::isfinite(emd(full_a, full_b)));
}

TEST_CASE("surface sampling and reference meshes") {
  const TriMesh m = reference_mesh(make_sphere(0.3), 48);
  const auto pts = sample_surface(m, 500, 7);
  REQUIRE(pts.size() == 500);
  for (const auto& p : pts) CHECK(std::abs(p.norm() - 0.3) < 2.0 / 47);
  CHECK(pts == sample_surface(m, 500, 7));
  CHECK_THROWS_AS(sample_surface(TriMesh{}, 5, 1), UsageError);
  CHECK(std::abs(surface_area(m) - 4 * std::numbers::pi * 0.09) < 0.05 * 4 * std::numbers::pi * 0.09);
}

TEST_CASE("normal quantiles") {
  CHECK(std::abs(normal_quantile(0.5)) < 1e-12);
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-9);
  CHECK(std::abs(normal_quantile(0.001) + 3.090232306167814) < 1e-9);
  CHECK(std::abs(central_quantile(0.9973) - 3.0) < 1e-3);
  CHECK(std::abs(central_quantile(0.6826894921370859) - 1.0) < 1e-9);
  for (double p = 0.01; p < 1.0; p += 0.01) CHECK(std::abs(erf_coverage(central_quantile(p)) - p) < 1e-12);
  CHECK_THROWS_AS(normal_quantile(0.0), UsageError);
  CHECK_THROWS_AS(central_quantile(1.0), UsageError);
}

TEST_CASE("calibration curves") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const std::size_t count = 10000;
  std::vector<double> mean(count), sigma(count), target(count);
  for (std::size_t i = 0; i < count; ++i) {
    mean[i] = n(rng);
    sigma[i] = u(rng);
    target[i] = mean[i] + sigma[i] * n(rng);
  }
  const CalibrationCurve c = calibration_curve(mean, sigma, target, CalibrationSpace::sdf);
  REQUIRE(c.probabilities.size() == 20);
  CHECK(c.space == CalibrationSpace::sdf);
  double worst = 0.0;
  for (std::size_t t = 0; t < 20; ++t) {
    CHECK(c.probabilities[t] == doctest::Approx((t + 1) / 21.0));
    worst = std::max(worst, std::abs(c.frequencies[t] - c.probabilities[t]));
    if (t > 0) {
      CHECK(c.probabilities[t] > c.probabilities[t - 1]);
      CHECK(c.frequencies[t] >= c.frequencies[t - 1]);
    }
  }
  CHECK(worst < 0.03);

  std::vector<double> inflated = sigma;
  for (double& s : inflated) s *= 10.0;
  const CalibrationCurve wide = calibration_curve(mean, inflated, target, CalibrationSpace::sdf);
  for (std::size_t t = 0; t < 20; ++t) {
    if (wide.probabilities[t] >= 0.2 && wide.probabilities[t] <= 0.8) CHECK(wide.frequencies[t] > wide.probabilities[t]);
  }

  // Latent form flattens every dimension.
  std::vector<LatentGaussian> preds;
  std::vector<std::vector<double>> targets;
  for (std::size_t i = 0; i + 1 < 200; i += 2) {
    preds.push_back({{mean[i], mean[i + 1]}, {sigma[i] * sigma[i], sigma[i + 1] * sigma[i + 1]}});
    targets.push_back({target[i], target[i + 1]});
  }
  const CalibrationCurve lat = calibration_curve(preds, targets);
  const CalibrationCurve flat = calibration_curve(std::span(mean).first(200), std::span(sigma).first(200),
                                                  std::span(target).first(200), CalibrationSpace::latent);
  CHECK(lat.space == CalibrationSpace::latent);
  for (std::size_t t = 0; t < 20; ++t) CHECK(lat.frequencies[t] == flat.frequencies[t]);

  CHECK_THROWS_AS(calibration_curve(std::span(mean).first(99), std::span(sigma).first(99),
                                    std::span(target).first(99), CalibrationSpace::sdf),
                  UsageError);

  std::ostringstream os;
  write_calibration_csv(os, c);
  CHECK(os.str().rfind("p_t,F_t\n", 0) == 0);
}

TEST_CASE("scalar and latent scores") {
  const std::vector<double> m{0.1, -0.3}, one{1.0, 1.0};
  CHECK(score_nll_scalar(m, one, m) == 0.0);

  // Targets drawn from the claimed Gaussian: E[ES] = sigma / sqrt(pi).
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t count = 20000;
  const double sd = 0.7;
  std::vector<double> mean(count, 0.2), var(count, sd * sd), target(count);
  for (double& t : target) t = 0.2 + sd * n(rng);
  const double es = score_es_scalar(mean, var, target, 10000, 6);
  CHECK(rel_err(es, sd / std::sqrt(std::numbers::pi)) < 0.02);

  const std::vector<LatentGaussian> preds{{{0.0, 1.0}, {0.5, 2.0}}, {{1.0, 0.0}, {1.0, 1.0}}};
  const std::vector<std::vector<double>> z{{0.1, 0.9}, {0.5, 0.5}};
  CHECK(score_nll(preds, z) == nll_loss(preds, z).value);
  CHECK(score_es(preds, z, 50, 3) == energy_score_loss(preds, z, 50, 3).value);

  CHECK_THROWS_AS(score_nll_scalar(m, std::vector<double>{1.0}, m), DimensionError);
  CHECK_THROWS_AS(score_es_scalar(m, one, m, 1, 0), UsageError);
}

TEST_CASE("SDF-space scores split by distance to the surface") {
  const std::vector<double> mean{0.0, 0.05, -0.02, 0.1};
  const std::vector<double> var{1e-4, 0.0, 1e-3, 1e-2};
  const std::vector<double> gt{0.005, 0.5, -0.01, 0.02};
  const SdfSpaceScores s = score_sdf_space(mean, var, gt, 0.1, 100, 1);
  CHECK(s.all.count == 4);
  CHECK(s.surface.count == 2);
  CHECK(s.non_surface.count == 2);
  // Point 1: variance floored, target clamped to 0.1.
  const double nll1 = 0.5 * (0.05 * 0.05 / kVarFloor + std::log(kVarFloor));
  const double nll3 = 0.5 * (0.08 * 0.08 / 1e-2 + std::log(1e-2));
  CHECK(rel_err(s.non_surface.nll, 0.5 * (nll1 + nll3)) < 1e-12);
  CHECK(rel_err(s.all.nll * 4, s.surface.nll * 2 + s.non_surface.nll * 2) < 1e-12);
  CHECK(rel_err(s.all.es * 4, s.surface.es * 2 + s.non_surface.es * 2) < 1e-12);

  std::ostringstream os;
  write_sdf_scores_csv(os, {"Ours"}, {s});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "method,split,nll,es,count");
  std::getline(is, line);
  CHECK(line.rfind("Ours,all,", 0) == 0);
  CHECK_THROWS_AS(write_sdf_scores_csv(os, {"a", "b"}, {s}), DimensionError);
}

TEST_CASE("fusion modes") {
  CHECK(fusion_mode_from_string("bayesian-k") == FusionMode::bayesian_k);
  CHECK(to_string(FusionMode::average) == "average");
  CHECK_THROWS_AS(fusion_mode_from_string("median"), UsageError);
  CHECK(method_label(FusionMode::bayesian_k, 4) == "Bayesian-4");
  const std::vector<LatentGaussian> v{{{0.0}, {1.0}}, {{1.0}, {3.0}}};
  CHECK(fuse_views(v, FusionMode::bayesian_k, 10).mean == fuse(v).mean);
  CHECK(fuse_views(v, FusionMode::average, 1).mean[0] == 0.5);
  CHECK_THROWS_AS(fuse_views(v, FusionMode::bayesian_k, 0), UsageError);
}

TEST_CASE("experiment driver") {
  const Models& m = models();
  const ExperimentConfig cfg = small_experiment();

  SUBCASE("reports are deterministic") {
    const ExperimentReport a = run_experiment(m.decoder, m.encoder, m.shapes, cfg);
    const ExperimentReport b = run_experiment(m.decoder, m.encoder, m.shapes, cfg);
    std::ostringstream ca, cb;
    write_instance_csv(ca, a);
    write_instance_csv(cb, b);
    CHECK(ca.str() == cb.str());
    REQUIRE(a.rows.size() == 3 * 2 * 2);
    CHECK(a.rows.front().mode == FusionMode::average);
    CHECK(a.rows.back().mode == FusionMode::bayesian_k);
    for (const auto& r : a.rows) {
      CHECK(r.iou >= 0.0);
      CHECK(r.iou <= 1.0);
    }
    CHECK(a.summary_for(FusionMode::bayesian).rows == 4);
    std::ostringstream table;
    write_method_table_csv(table, {a});
    CHECK(table.str().rfind("method,iou,chamfer,emd\nAverage,", 0) == 0);
    CHECK(table.str().find("Bayesian-2,") != std::string::npos);
  }
  SUBCASE("K equal to the view count reproduces Bayesian") {
    ExperimentConfig c = cfg;
    c.k = c.views;
    c.min_scale = 0.3;
    const ExperimentReport r = run_experiment(m.decoder, m.encoder, m.shapes, c);
    std::vector<InstanceMetrics> bayes, bk;
    for (const auto& row : r.rows) (row.mode == FusionMode::bayesian ? bayes : bk).push_back(row);
    bk.erase(std::remove_if(bk.begin(), bk.end(), [](const auto& x) { return x.mode != FusionMode::bayesian_k; }),
             bk.end());
    REQUIRE(bayes.size() == bk.size());
    for (std::size_t i = 0; i < bayes.size(); ++i) {
      CHECK(bayes[i].iou == bk[i].iou);
      CHECK(same(bayes[i].chamfer, bk[i].chamfer));
      CHECK(same(bayes[i].emd, bk[i].emd));
      CHECK(bayes[i].trace == bk[i].trace);
    }
  }
  SUBCASE("a single view gives the same shape under every mode") {
    ExperimentConfig c = cfg;
    c.views = 1;
    c.point_metrics = false;
    const ExperimentReport r = run_experiment(m.decoder, m.encoder, m.shapes, c);
    CHECK(r.summary_for(FusionMode::average).mean_iou == r.summary_for(FusionMode::bayesian).mean_iou);
    CHECK(r.summary_for(FusionMode::bayesian_k).mean_iou == r.summary_for(FusionMode::bayesian).mean_iou);
  }
  SUBCASE("crop sweep table") {
    std::vector<ExperimentReport> reports;
    for (double s : {1.0, 0.4}) {
      ExperimentConfig c = cfg;
      c.min_scale = s;
      c.point_metrics = false;
      c.seeds = {0};
      reports.push_back(run_experiment(m.decoder, m.encoder, m.shapes, c));
    }
    std::ostringstream os;
    write_min_scale_table_csv(os, reports);
    CHECK(os.str().rfind("method,min_scale_1,min_scale_0.4\nAverage,", 0) == 0);
  }
  SUBCASE("input checks") {
    ExperimentConfig c = cfg;
    c.min_scale = 0.0;
    CHECK_THROWS_AS(run_experiment(m.decoder, m.encoder, m.shapes, c), UsageError);
    CHECK_THROWS_AS(run_experiment(m.decoder, m.encoder, {}, cfg), UsageError);
    const EncoderModel wrong = make_encoder(3, 32, 32, {4}, 1);
    CHECK_THROWS_AS(run_experiment(m.decoder, wrong, m.shapes, cfg), DimensionError);
  }
}
