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
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "reference.hpp"
#include "test_util.hpp"
#include "usdf/propagation.hpp"

using namespace usdf;
using usdf::test::rel_err;

namespace {

// f(X, z) = a.z + b + c.X: Gaussian in z with variance sum a_i^2 sigma_i^2.
class LinearField final : public LatentField {
 public:
  LinearField(std::vector<double> a, double b) : a_(std::move(a)), b_(b) {}
  int latent_dim() const override { return static_cast<int>(a_.size()); }
  void decode(std::span<const double> code, std::span<const Vec3> points,
              std::span<double> out) const override {
    double s = b_;
    for (std::size_t i = 0; i < a_.size(); ++i) s += a_[i] * code[i];
    for (std::size_t p = 0; p < points.size(); ++p) out[p] = s + 0.1 * points[p].x() - 0.2 * points[p].z();
  }
  double variance(const LatentGaussian& g) const {
    double v = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) v += a_[i] * a_[i] * g.var[i];
    return v;
  }

 private:
  std::vector<double> a_;
  double b_;
};

LatentGaussian latent(int dim, double var, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  LatentGaussian g;
  for (int d = 0; d < dim; ++d) {
    g.mean.push_back(n(rng));
    g.var.push_back(var * (1.0 + 0.5 * d));
  }
  return g;
}

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

const LinearField kLinear({0.5, -1.0, 2.0}, 0.1);

}  // namespace

TEST_CASE("linear field variance matches the closed form") {
  const LatentGaussian g = latent(3, 0.04, 1);
  const auto pts = random_points(5, 2);
  const PointMoments pm = propagate_points(kLinear, g, pts, 100000, 3);
  for (double v : pm.var) CHECK(rel_err(v, kLinear.variance(g)) < 0.05);
  // The codes are shared, so every point sees the same latent draw.
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(std::abs(pm.var[i] - pm.var[0]) < 1e-12);
}

TEST_CASE("variance estimator is unbiased") {
  const LatentGaussian g = latent(3, 0.01, 4);
  const std::vector<Vec3> pt{Vec3(0.1, 0.2, 0.3)};
  std::vector<double> est;
  for (std::uint64_t rep = 0; rep < 100; ++rep) est.push_back(propagate_points(kLinear, g, pt, 100, rep).var[0]);
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 100.0;
  double ss = 0.0;
  for (double e : est) ss += (e - mean) * (e - mean);
  const double se = std::sqrt(ss / 99.0) / 10.0;
  CHECK(std::abs(mean - kLinear.variance(g)) < 2.0 * se);
}

TEST_CASE("estimates tighten with more samples") {
  const LatentGaussian g = latent(3, 0.01, 5);
  const std::vector<Vec3> pt{Vec3::Zero()};
  auto spread = [&](int m) {
    std::vector<double> est;
    for (std::uint64_t rep = 0; rep < 20; ++rep) est.push_back(propagate_points(kLinear, g, pt, m, 1000 + rep).var[0]);
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 20.0;
    double ss = 0.0;
    for (double e : est) ss += (e - mean) * (e - mean);
    return ss / 19.0;
  };
  CHECK(spread(1000) < spread(10));
}

TEST_CASE("streaming moments equal the two-pass computation") {
  const DecoderModel m = make_decoder(4, {32, 32}, 0.1, 7);
  const DecoderField field(m);
  const LatentGaussian g = latent(4, 0.3, 8);
  const auto pts = random_points(5000, 9);
  const PointMoments a = propagate_points(field, g, pts, 37, 10);
  const PointMoments b = reference::propagate_points_two_pass(field, g, pts, 37, 10);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(rel_err(a.mean[i], b.mean[i], 1e-12) < 1e-9);
    CHECK(rel_err(a.var[i], b.var[i], 1e-15) < 1e-9);
  }
  CHECK(propagate_points(field, g, pts, 37, 10).var == a.var);
}

TEST_CASE("collapsed latent reproduces the decoded mean") {
  const DecoderModel m = make_decoder(4, {32, 32}, 0.1, 11);
  const DecoderField field(m);
  LatentGaussian g = latent(4, kVarFloor, 12);
  std::fill(g.var.begin(), g.var.end(), kVarFloor);
  const auto pts = random_points(500, 13);
  const PointMoments pm = propagate_points(field, g, pts, 50, 14);
  const auto direct = decode_sdf(m, g.mean, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pm.var[i] < 1e-6);
    CHECK(std::abs(pm.mean[i] - direct[i]) < 1e-3);
  }
  const auto sigma = propagate_vertices(field, g, pts, 10, 15);
  for (double s : sigma) CHECK(s < 1e-3);
}

TEST_CASE("code sampling") {
  const LatentGaussian g = latent(3, 0.2, 1);
  const auto a = sample_codes(g, 20000, 2);
  CHECK(a == sample_codes(g, 20000, 2));
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0, sq = 0.0;
    for (const auto& z : a) mean += z[d];
    mean /= a.size();
    for (const auto& z : a) sq += (z[d] - mean) * (z[d] - mean);
    CHECK(std::abs(mean - g.mean[d]) < 4.0 * std::sqrt(g.var[d] / a.size()));
    CHECK(rel_err(sq / (a.size() - 1), g.var[d]) < 0.05);
  }
}

TEST_CASE("grid propagation") {
  const DecoderModel m = make_decoder(3, {16, 16}, 0.1, 21);
  const DecoderField field(m);
  const LatentGaussian g = latent(3, 0.5, 22);
  const UncertainSdfGrid grid = propagate_grid(field, g, 12, 10, 23);
  CHECK(grid.resolution == 12);
  CHECK(grid.sample_count == 10);
  CHECK(grid.origin == -0.5);
  CHECK(grid.spacing == doctest::Approx(1.0 / 11.0));
  const auto lattice = lattice_points(12);
  REQUIRE(lattice.size() == 12u * 12u * 12u);
  CHECK(lattice.front() == Vec3(-0.5, -0.5, -0.5));
  CHECK((lattice.back() - Vec3(0.5, 0.5, 0.5)).norm() < 1e-15);
  CHECK(lattice[grid.index(1, 0, 0)].x() > lattice[0].x());

  const PointMoments pm = propagate_points(field, g, lattice, 10, 23);
  CHECK(grid.mean == pm.mean);
  CHECK(grid.var == pm.var);
  for (std::size_t i = 0; i < grid.var.size(); ++i) {
    CHECK(grid.var[i] >= 0.0);
    CHECK(std::abs(grid.mean[i]) <= m.sdf_clamp);
  }

  const auto decoded = decode_grid(field, g.mean, 12);
  CHECK(decoded == decode_sdf(m, g.mean, lattice));

  const auto sigma = propagate_vertices(field, g, lattice, 10, 23);
  for (std::size_t i = 0; i < sigma.size(); ++i) CHECK(sigma[i] == std::sqrt(pm.var[i]));

  CHECK_THROWS_AS(propagate_grid(field, g, 7, 10, 1), UsageError);
  CHECK_THROWS_AS(propagate_points(field, g, lattice, 1, 1), UsageError);
  CHECK_THROWS_AS(propagate_points(field, latent(2, 0.1, 1), lattice, 4, 1), DimensionError);
}

TEST_CASE("grid files round trip") {
  const DecoderModel m = make_decoder(2, {8}, 0.1, 31);
  const DecoderField field(m);
  const UncertainSdfGrid grid = propagate_grid(field, latent(2, 0.1, 32), 8, 5, 33);
  usdf::test::TempDir dir("grid");
  save_grid(dir / "g.bin", grid);
  CHECK(std::filesystem::file_size(dir / "g.bin") == 8 + 4 + 4 + 8 + 8 + 4 + 2 * 512 * 8);
  const UncertainSdfGrid back = load_grid(dir / "g.bin");
  CHECK(back.resolution == 8);
  CHECK(back.sample_count == 5);
  CHECK(back.origin == grid.origin);
  CHECK(back.spacing == grid.spacing);
  CHECK(back.mean == grid.mean);
  CHECK(back.var == grid.var);

  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "NOTAGRID";
  }
  CHECK_THROWS_AS(load_grid(dir / "bad.bin"), DataError);
  std::filesystem::resize_file(dir / "g.bin", 100);
  CHECK_THROWS_AS(load_grid(dir / "g.bin"), DataError);
  CHECK_THROWS_AS(load_grid(dir / "none.bin"), DataError);
}

TEST_CASE("SDF histograms") {
  const LatentGaussian g = latent(3, 0.05, 41);
  const SdfHistogram h = sdf_histogram(kLinear, g, Vec3(0.1, 0, 0), 1000, 25, 42);
  CHECK(h.samples.size() == 1000);
  CHECK(h.edges.size() == 26);
  CHECK(h.counts.size() == 25);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0) == 1000);
  for (std::size_t i = 1; i < h.edges.size(); ++i) CHECK(h.edges[i] > h.edges[i - 1]);
  CHECK(count_modes(h.counts) == 1);

  const SdfHistogram again = sdf_histogram(kLinear, g, Vec3(0.1, 0, 0), 1000, 25, 42);
  CHECK(again.samples == h.samples);
  CHECK(again.counts == h.counts);

  std::ostringstream os;
  write_histogram_csv(os, h);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "bin_lo,bin_hi,count");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 25);

  CHECK_THROWS_AS(sdf_histogram(kLinear, g, Vec3::Zero(), 99, 10, 1), UsageError);
}

TEST_CASE("mode counting") {
  CHECK(count_modes({0, 1, 5, 9, 5, 1, 0}, 1) == 1);
  CHECK(count_modes({9, 1, 0, 0, 1, 9}, 1) == 2);
  CHECK(count_modes({3, 3, 3, 3}, 1) == 1);
  CHECK(count_modes({0, 4, 0, 4, 0, 0, 0, 0, 0, 8, 9, 8, 0}, 1) == 3);
  // Smoothing merges the two close peaks.
  CHECK(count_modes({0, 4, 0, 4, 0, 0, 0, 0, 0, 8, 9, 8, 0}, 5) == 2);
}
