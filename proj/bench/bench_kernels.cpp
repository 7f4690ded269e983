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

// OpenMP kernels against their serial reference implementations.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "reference.hpp"
#include "usdf/evaluation.hpp"
#include "usdf/propagation.hpp"

using namespace usdf;

namespace {

std::vector<double> sphere_values(int r) {
  std::vector<double> v;
  for (const auto& p : lattice_points(r)) v.push_back(p.norm() - 0.3 + 0.02 * std::sin(20.0 * p.x()));
  return v;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_MarchingCubes(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const auto values = sphere_values(r);
  const GridView g = unit_grid(values, r);
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes(g));
}

void BM_MarchingCubesSerial(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const auto values = sphere_values(r);
  const GridView g = unit_grid(values, r);
  for (auto _ : state) benchmark::DoNotOptimize(reference::marching_cubes_serial(g));
}

TriMesh bench_mesh() {
  const auto values = sphere_values(64);
  return marching_cubes(unit_grid(values, 64));
}

void BM_Voxelize(benchmark::State& state) {
  const TriMesh m = bench_mesh();
  for (auto _ : state) benchmark::DoNotOptimize(voxelize(m));
}

void BM_VoxelizeBruteForce(benchmark::State& state) {
  const TriMesh m = bench_mesh();
  for (auto _ : state) benchmark::DoNotOptimize(reference::voxelize_brute_force(m));
}

void BM_Chamfer(benchmark::State& state) {
  const auto a = random_points(state.range(0), 1);
  const auto b = random_points(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
}

void BM_ChamferKdTree(benchmark::State& state) {
  const auto a = random_points(state.range(0), 1);
  const auto b = random_points(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::chamfer_kdtree(a, b));
}

struct PropagationSetup {
  DecoderModel model = make_decoder(8, {128, 128, 128, 128}, 0.1, 3);
  LatentGaussian latent{std::vector<double>(8, 0.0), std::vector<double>(8, 0.05)};
  std::vector<Vec3> points = random_points(2048, 4);
};

void BM_Propagate(benchmark::State& state) {
  const PropagationSetup s;
  const DecoderField field(s.model);
  for (auto _ : state) benchmark::DoNotOptimize(propagate_points(field, s.latent, s.points, 10, 5));
}

void BM_PropagateTwoPass(benchmark::State& state) {
  const PropagationSetup s;
  const DecoderField field(s.model);
  for (auto _ : state) benchmark::DoNotOptimize(reference::propagate_points_two_pass(field, s.latent, s.points, 10, 5));
}

}  // namespace

BENCHMARK(BM_MarchingCubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MarchingCubesSerial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Voxelize)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VoxelizeBruteForce)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Chamfer)->Arg(1024)->Arg(8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ChamferKdTree)->Arg(1024)->Arg(8192)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Propagate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PropagateTwoPass)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
