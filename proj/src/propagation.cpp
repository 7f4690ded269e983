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

#include "usdf/propagation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>

namespace usdf {
namespace {

constexpr std::size_t kChunk = 4096;

void check_latent(const LatentField& field, const LatentGaussian& latent) {
  if (static_cast<int>(latent.dim()) != field.latent_dim() || latent.var.size() != latent.dim()) {
    throw DimensionError("propagation: latent dimension does not match the decoder");
  }
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("grid file truncated");
  return value;
}

}  // namespace

void DecoderField::decode(std::span<const double> code, std::span<const Vec3> points,
                          std::span<double> out) const {
  decode_sdf_into(*model_, code, points, out);
}

std::vector<std::vector<double>> sample_codes(const LatentGaussian& latent, int samples,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> sigma(latent.dim());
  for (std::size_t d = 0; d < latent.dim(); ++d) sigma[d] = std::sqrt(latent.var[d]);
  std::vector<std::vector<double>> codes(static_cast<std::size_t>(samples),
                                         std::vector<double>(latent.dim()));
  for (auto& z : codes) {
    for (std::size_t d = 0; d < latent.dim(); ++d) z[d] = latent.mean[d] + sigma[d] * normal(rng);
  }
  return codes;
}

PointMoments propagate_points(const LatentField& field, const LatentGaussian& latent,
                              std::span<const Vec3> points, int samples, std::uint64_t seed) {
  if (samples < 2) throw UsageError("propagate_points: need at least two Monte-Carlo samples");
  check_latent(field, latent);
  const auto codes = sample_codes(latent, samples, seed);
  PointMoments out;
  out.mean.resize(points.size());
  out.var.resize(points.size());
  const std::ptrdiff_t chunks = static_cast<std::ptrdiff_t>((points.size() + kChunk - 1) / kChunk);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t start = static_cast<std::size_t>(c) * kChunk;
    const std::size_t n = std::min(kChunk, points.size() - start);
    const auto chunk = points.subspan(start, n);
    std::vector<double> values(n);
    std::vector<Welford> acc(n);
    for (const auto& z : codes) {
      field.decode(z, chunk, values);
      for (std::size_t i = 0; i < n; ++i) acc[i].add(values[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.mean[start + i] = acc[i].mean;
      out.var[start + i] = acc[i].variance();
    }
  }
  return out;
}

std::vector<Vec3> lattice_points(int resolution) {
  if (resolution < 2) throw UsageError("lattice_points: resolution must be >= 2");
  const double h = 1.0 / (resolution - 1);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(resolution) * resolution * resolution);
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) pts.emplace_back(-0.5 + i * h, -0.5 + j * h, -0.5 + k * h);
  return pts;
}

UncertainSdfGrid propagate_grid(const LatentField& field, const LatentGaussian& latent,
                                int resolution, int samples, std::uint64_t seed) {
  if (resolution < 8) throw UsageError("propagate_grid: resolution must be >= 8");
  const auto pts = lattice_points(resolution);
  PointMoments m = propagate_points(field, latent, pts, samples, seed);
  UncertainSdfGrid grid;
  grid.resolution = resolution;
  grid.spacing = 1.0 / (resolution - 1);
  grid.sample_count = samples;
  grid.mean = std::move(m.mean);
  grid.var = std::move(m.var);
  return grid;
}

std::vector<double> decode_grid(const LatentField& field, std::span<const double> code,
                                int resolution) {
  const auto pts = lattice_points(resolution);
  std::vector<double> out(pts.size());
  const std::ptrdiff_t chunks = static_cast<std::ptrdiff_t>((pts.size() + kChunk - 1) / kChunk);
  const std::span<const Vec3> all(pts);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t start = static_cast<std::size_t>(c) * kChunk;
    const std::size_t n = std::min(kChunk, pts.size() - start);
    field.decode(code, all.subspan(start, n), std::span<double>(out).subspan(start, n));
  }
  return out;
}

std::vector<double> propagate_vertices(const LatentField& field, const LatentGaussian& latent,
                                       std::span<const Vec3> vertices, int samples,
                                       std::uint64_t seed) {
  PointMoments m = propagate_points(field, latent, vertices, samples, seed);
  std::vector<double> sigma(m.var.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = std::sqrt(m.var[i]);
  return sigma;
}

SdfHistogram sdf_histogram(const LatentField& field, const LatentGaussian& latent,
                           const Vec3& point, int samples, int bins, std::uint64_t seed) {
  if (samples < 100) throw UsageError("sdf_histogram: need at least 100 samples");
  if (bins < 1) throw UsageError("sdf_histogram: need at least one bin");
  check_latent(field, latent);
  SdfHistogram h;
  h.point = point;
  const auto codes = sample_codes(latent, samples, seed);
  h.samples.resize(codes.size());
  const Vec3 pts[1] = {point};
  for (std::size_t m = 0; m < codes.size(); ++m) {
    field.decode(codes[m], pts, std::span<double>(&h.samples[m], 1));
  }
  auto [lo_it, hi_it] = std::minmax_element(h.samples.begin(), h.samples.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi - lo < 1e-15) {
    lo -= 1e-12;
    hi += 1e-12;
  }
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : h.samples) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    h.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1;
  }
  return h;
}

int count_modes(const std::vector<int>& counts, int window) {
  const int n = static_cast<int>(counts.size());
  const int half = window / 2;
  std::vector<double> smooth(counts.size());
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    int used = 0;
    for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j) {
      s += counts[j];
      ++used;
    }
    smooth[i] = s / used;
  }
  // Plateaus count once: compare against the nearest differing neighbour.
  int modes = 0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && smooth[j + 1] == smooth[i]) ++j;
    const bool left_lower = i == 0 || smooth[i - 1] < smooth[i];
    const bool right_lower = j == n - 1 || smooth[j + 1] < smooth[i];
    if (left_lower && right_lower) ++modes;
    i = j + 1;
  }
  return modes;
}

void save_grid(const std::filesystem::path& path, const UncertainSdfGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write("USDFGRID", 8);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.resolution));
  put_le<double>(out, grid.origin);
  put_le<double>(out, grid.spacing);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.sample_count));
  out.write(reinterpret_cast<const char*>(grid.mean.data()),
            static_cast<std::streamsize>(grid.mean.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(grid.var.data()),
            static_cast<std::streamsize>(grid.var.size() * sizeof(double)));
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

UncertainSdfGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "USDFGRID", 8) != 0) throw DataError(path.string() + ": bad magic");
  if (get_le<std::uint32_t>(in) != 1) throw DataError(path.string() + ": unsupported version");
  UncertainSdfGrid g;
  g.resolution = static_cast<int>(get_le<std::uint32_t>(in));
  g.origin = get_le<double>(in);
  g.spacing = get_le<double>(in);
  g.sample_count = static_cast<int>(get_le<std::uint32_t>(in));
  const std::size_t n = static_cast<std::size_t>(g.resolution) * g.resolution * g.resolution;
  g.mean.resize(n);
  g.var.resize(n);
  in.read(reinterpret_cast<char*>(g.mean.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(g.var.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError(path.string() + ": truncated payload");
  return g;
}

void write_histogram_csv(std::ostream& out, const SdfHistogram& hist) {
  out << "bin_lo,bin_hi,count\n" << std::setprecision(17);
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << hist.edges[b] << ',' << hist.edges[b + 1] << ',' << hist.counts[b] << '\n';
  }
}

}  // namespace usdf
