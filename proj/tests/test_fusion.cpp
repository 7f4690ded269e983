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

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "reference.hpp"
#include "test_util.hpp"
#include "usdf/fusion.hpp"

using namespace usdf;
using usdf::test::rel_err;

namespace {

std::vector<LatentGaussian> random_observations(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> logvar(-6.0, 1.0);
  std::vector<LatentGaussian> out(n);
  for (auto& g : out) {
    for (std::size_t d = 0; d < dim; ++d) {
      g.mean.push_back(normal(rng));
      g.var.push_back(std::exp(logvar(rng)));
    }
  }
  return out;
}

void check_close(const LatentGaussian& a, const LatentGaussian& b, double tol) {
  REQUIRE(a.dim() == b.dim());
  for (std::size_t d = 0; d < a.dim(); ++d) {
    CHECK(rel_err(a.mean[d], b.mean[d], 1e-300) <= tol);
    CHECK(rel_err(a.var[d], b.var[d], 1e-300) <= tol);
  }
}

}  // namespace

TEST_CASE("identical observations divide the variance by N") {
  const LatentGaussian g{{0.3, -1.2, 5.0, 0.0}, {0.5, 2.0, 1e-3, 7.0}};
  for (std::size_t n : {1u, 2u, 5u, 10u, 64u}) {
    const std::vector<LatentGaussian> obs(n, g);
    const LatentGaussian f = fuse(obs);
    for (std::size_t d = 0; d < g.dim(); ++d) {
      CHECK(rel_err(f.mean[d], g.mean[d], 1e-300) < 1e-12);
      CHECK(rel_err(f.var[d], g.var[d] / static_cast<double>(n)) < 1e-12);
    }
  }
}

TEST_CASE("symmetric pair") {
  const std::vector<LatentGaussian> obs{{{0.0}, {1.0}}, {{1.0}, {1.0}}};
  const LatentGaussian f = fuse(obs);
  CHECK(f.mean[0] == 0.5);
  CHECK(f.var[0] == 0.5);
}

TEST_CASE("fusion matches the dense-matrix product of Gaussians") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto obs = random_observations(2 + seed % 9, 8, seed);
    check_close(fuse(obs), reference::fuse_dense(obs), 1e-12);
  }
}

TEST_CASE("incremental fusion equals batch fusion under any order") {
  auto obs = random_observations(10, 6, 3);
  const LatentGaussian batch = fuse(obs);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    std::shuffle(obs.begin(), obs.end(), rng);
    FusionState state;
    std::vector<double> prev_var;
    for (const auto& g : obs) {
      state = fuse_incremental(state, g);
      const LatentGaussian post = state.posterior();
      if (!prev_var.empty()) {
        for (std::size_t d = 0; d < post.dim(); ++d) CHECK(post.var[d] <= prev_var[d]);
      }
      prev_var = post.var;
    }
    CHECK(state.view_count() == obs.size());
    CHECK(state.log().size() == obs.size());
    check_close(state.posterior(), batch, 1e-12);
    check_close(fuse(state.log()), batch, 1e-12);
  }
}

TEST_CASE("single observation posterior") {
  const auto obs = random_observations(1, 5, 9);
  FusionState state;
  state.add(obs[0]);
  check_close(state.posterior(), obs[0], 1e-15);
  CHECK_THROWS_AS(FusionState().posterior(), UsageError);
  CHECK_THROWS_AS(state.add(random_observations(1, 4, 1)[0]), DimensionError);
}

TEST_CASE("fused variance and mean bounds, scaling") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto obs = random_observations(7, 5, 100 + seed);
    const LatentGaussian f = fuse(obs);
    for (std::size_t d = 0; d < 5; ++d) {
      double lo = 1e300, hi = -1e300, min_var = 1e300;
      for (const auto& g : obs) {
        lo = std::min(lo, g.mean[d]);
        hi = std::max(hi, g.mean[d]);
        min_var = std::min(min_var, g.var[d]);
      }
      CHECK(f.var[d] <= min_var);
      CHECK(f.mean[d] >= lo - 1e-12);
      CHECK(f.mean[d] <= hi + 1e-12);
    }
    auto scaled = obs;
    for (auto& g : scaled)
      for (double& v : g.var) v *= 3.5;
    const LatentGaussian fs = fuse(scaled);
    for (std::size_t d = 0; d < 5; ++d) {
      CHECK(rel_err(fs.mean[d], f.mean[d], 1e-300) < 1e-12);
      CHECK(rel_err(fs.var[d], 3.5 * f.var[d]) < 1e-12);
    }
  }
}

TEST_CASE("fusion input checks") {
  CHECK_THROWS_AS(fuse({}), UsageError);
  auto obs = random_observations(3, 4, 1);
  obs[1].mean.pop_back();
  obs[1].var.pop_back();
  CHECK_THROWS_AS(fuse(obs), UsageError);
  CHECK_THROWS_AS(fuse_average(obs), UsageError);
}

TEST_CASE("average fusion") {
  const std::vector<LatentGaussian> obs{{{0.0, 2.0}, {1.0, 4.0}}, {{1.0, 4.0}, {100.0, 1e-4}}};
  const LatentGaussian a = fuse_average(obs);
  CHECK(a.mean[0] == 0.5);
  CHECK(a.mean[1] == 3.0);
  CHECK(a.var[0] == doctest::Approx(101.0 / 4.0));
  const auto one = random_observations(1, 3, 2);
  CHECK(fuse_average(one).mean == one[0].mean);
  CHECK(fuse_average(one).var == one[0].var);
}

TEST_CASE("Bayesian-K selection") {
  SUBCASE("K = N is plain fusion") {
    const auto obs = random_observations(10, 6, 5);
    const SelectionResult r = select_bayesian_k(obs, 10);
    const LatentGaussian f = fuse(obs);
    CHECK(r.fused.mean == f.mean);
    CHECK(r.fused.var == f.var);
    CHECK(r.selected.size() == 10);
  }
  SUBCASE("K = 1 returns the tightest observation") {
    const auto obs = random_observations(10, 6, 6);
    const SelectionResult r = select_bayesian_k(obs, 1);
    std::size_t best = 0;
    for (std::size_t i = 1; i < obs.size(); ++i)
      if (obs[i].trace() < obs[best].trace()) best = i;
    REQUIRE(r.selected.size() == 1);
    CHECK(r.selected[0] == best);
    check_close(r.fused, obs[best], 1e-15);
  }
  SUBCASE("selection matches a sort oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto obs = random_observations(10, 4, 40 + seed);
      std::vector<std::pair<double, std::size_t>> keyed;
      for (std::size_t i = 0; i < obs.size(); ++i) keyed.emplace_back(obs[i].trace(), i);
      std::sort(keyed.begin(), keyed.end());
      for (int k = 1; k <= 10; ++k) {
        const SelectionResult r = select_bayesian_k(obs, k);
        for (int j = 0; j < k; ++j) CHECK(r.selected[j] == keyed[j].second);
      }
    }
  }
  SUBCASE("ties go to the earlier view") {
    const LatentGaussian a{{0.0}, {1.0}};
    const LatentGaussian b{{1.0}, {1.0}};
    const LatentGaussian c{{2.0}, {0.5}};
    const std::vector<LatentGaussian> obs{a, b, c, a};
    const SelectionResult r = select_bayesian_k(obs, 2);
    CHECK(r.selected == std::vector<std::size_t>{2, 0});
  }
  const auto obs = random_observations(4, 2, 7);
  CHECK_THROWS_AS(select_bayesian_k(obs, 0), UsageError);
  CHECK_THROWS_AS(select_bayesian_k(obs, 5), UsageError);
}

TEST_CASE("fusion trace CSV") {
  const std::vector<LatentGaussian> obs{{{0.0}, {1.0}}, {{1.0}, {1.0}}, {{4.0}, {4.0}}};
  std::ostringstream os;
  write_fusion_trace(os, obs, {0, 1});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "view_index,trace,selected,posterior_trace");
  std::getline(is, line);
  CHECK(line == "0,1,1,1");
  std::getline(is, line);
  CHECK(line == "1,1,1,0.5");
  std::getline(is, line);
  CHECK(line == "2,4,0,0.44444444444444442");
}
