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

#include "usdf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "usdf/container.hpp"

namespace usdf {
namespace {

constexpr std::size_t kDecodeChunk = 4096;

double clamp_sdf(double v, double c) { return std::clamp(v, -c, c); }

void fill_inputs(DenseArray& in, std::span<const Vec3> points, std::span<const double> code) {
  const std::size_t width = 3 + code.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double* row = in.data.data() + i * width;
    row[0] = points[i].x();
    row[1] = points[i].y();
    row[2] = points[i].z();
    std::copy(code.begin(), code.end(), row + 3);
  }
}

}  // namespace

const std::vector<double>& LatentCodebook::code_for(int instance_id) const {
  for (std::size_t i = 0; i < instance_ids.size(); ++i) {
    if (instance_ids[i] == instance_id) return codes[i];
  }
  throw DataError("codebook has no entry for instance " + std::to_string(instance_id));
}

bool LatentCodebook::contains(int instance_id) const {
  return std::find(instance_ids.begin(), instance_ids.end(), instance_id) != instance_ids.end();
}

DecoderModel make_decoder(int latent_dim, std::vector<std::size_t> hidden, double sdf_clamp,
                          std::uint64_t seed) {
  if (latent_dim < 1) throw UsageError("make_decoder: latent_dim must be >= 1");
  if (!(sdf_clamp > 0.0)) throw UsageError("make_decoder: sdf_clamp must be positive");
  std::vector<std::size_t> dims{3 + static_cast<std::size_t>(latent_dim)};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::tanh;
  DecoderModel model;
  model.mlp = make_mlp(std::move(dims), std::move(acts), seed);
  model.latent_dim = latent_dim;
  model.sdf_clamp = sdf_clamp;
  return model;
}

void decode_sdf_into(const DecoderModel& model, std::span<const double> code,
                     std::span<const Vec3> points, std::span<double> out) {
  if (static_cast<int>(code.size()) != model.latent_dim) {
    throw DimensionError("decode_sdf: code has " + std::to_string(code.size()) +
                         " entries, decoder expects " + std::to_string(model.latent_dim));
  }
  if (out.size() != points.size()) throw DimensionError("decode_sdf: output size mismatch");
  const std::size_t width = 3 + code.size();
  DenseArray in;
  for (std::size_t start = 0; start < points.size(); start += kDecodeChunk) {
    const std::size_t n = std::min(kDecodeChunk, points.size() - start);
    in.shape = {n, width};
    in.data.resize(n * width);
    fill_inputs(in, points.subspan(start, n), code);
    const DenseArray y = forward(model.mlp, in);
    for (std::size_t i = 0; i < n; ++i) out[start + i] = model.sdf_clamp * y.data[i];
  }
}

std::vector<double> decode_sdf(const DecoderModel& model, std::span<const double> code,
                               std::span<const Vec3> points) {
  std::vector<double> out(points.size());
  decode_sdf_into(model, code, points, out);
  return out;
}

double clamped_l1(const DecoderModel& model, std::span<const double> code,
                  const std::vector<SdfSample>& samples) {
  if (samples.empty()) return 0.0;
  std::vector<Vec3> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(s.point);
  const auto pred = decode_sdf(model, code, pts);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += std::abs(pred[i] - clamp_sdf(samples[i].sdf, model.sdf_clamp));
  }
  return total / static_cast<double>(samples.size());
}

DecoderTrainResult train_decoder(const std::vector<ShapeSpec>& shapes,
                                 const std::vector<std::vector<SdfSample>>& samples,
                                 const DecoderTrainConfig& config, std::ostream* log) {
  if (shapes.size() < 2) throw UsageError("train_decoder: need at least two training shapes");
  if (samples.size() != shapes.size()) {
    throw UsageError("train_decoder: one sample set per shape required");
  }
  for (const auto& s : samples) {
    if (s.empty()) throw UsageError("train_decoder: empty sample set");
  }
  if (config.epochs < 0 || config.batch_size < 1 || config.points_per_shape < 1) {
    throw UsageError("train_decoder: invalid epochs/batch/points configuration");
  }

  const std::size_t n_shapes = shapes.size();
  const std::size_t dim = static_cast<std::size_t>(config.latent_dim);
  DecoderTrainResult result;
  result.model = make_decoder(config.latent_dim, config.hidden, config.sdf_clamp,
                              derive_seed(config.seed, "decoder_init"));
  DecoderModel& model = result.model;
  const double clamp = model.sdf_clamp;

  std::mt19937_64 rng(derive_seed(config.seed, "decoder_train"));
  std::normal_distribution<double> code_init(0.0, config.code_init_sigma);
  std::vector<double> codes(n_shapes * dim);
  for (double& v : codes) v = code_init(rng);
  std::vector<double> code_m(codes.size(), 0.0);
  std::vector<double> code_v(codes.size(), 0.0);
  std::vector<std::int64_t> code_steps(n_shapes, 0);
  const AdamHyper code_hyper{config.lr_codes};

  AdamState adam = make_adam(model.mlp, AdamHyper{config.lr_weights});

  const std::size_t width = 3 + dim;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> order;
  std::vector<std::uint32_t> pick;
  DenseArray in;
  DenseArray out_grad;
  ForwardCache cache;
  std::vector<double> code_grad(codes.size());
  std::vector<int> code_hits(n_shapes);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Learning rates halve at 60% and 85% of the schedule.
    const double decay = epoch >= config.epochs * 0.85 ? 0.25 : (epoch >= config.epochs * 0.6 ? 0.5 : 1.0);
    adam.lr = config.lr_weights * decay;

    order.clear();
    for (std::size_t s = 0; s < n_shapes; ++s) {
      const std::size_t n = samples[s].size();
      const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(config.points_per_shape));
      pick.resize(n);
      std::iota(pick.begin(), pick.end(), 0u);
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, n - 1);
        std::swap(pick[i], pick[d(rng)]);
        order.emplace_back(static_cast<std::uint32_t>(s), pick[i]);
      }
    }
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
      in.shape = {b, width};
      in.data.resize(b * width);
      std::vector<double> targets(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto [s, k] = order[start + i];
        const SdfSample& smp = samples[s][k];
        double* row = in.data.data() + i * width;
        row[0] = smp.point.x();
        row[1] = smp.point.y();
        row[2] = smp.point.z();
        std::copy_n(codes.begin() + static_cast<std::ptrdiff_t>(s * dim), dim, row + 3);
        targets[i] = clamp_sdf(smp.sdf, clamp);
      }
      const DenseArray y = forward(model.mlp, in, &cache);
      out_grad.shape = {b, 1};
      out_grad.data.assign(b, 0.0);
      double batch_loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const double diff = clamp * y.data[i] - targets[i];
        batch_loss += std::abs(diff);
        out_grad.data[i] = diff > 0.0 ? clamp * inv_b : (diff < 0.0 ? -clamp * inv_b : 0.0);
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("train_decoder: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss * static_cast<double>(b);

      const MlpGradients g = backward(model.mlp, cache, out_grad);
      adam_step(model.mlp, g, adam);

      std::fill(code_grad.begin(), code_grad.end(), 0.0);
      std::fill(code_hits.begin(), code_hits.end(), 0);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t s = order[start + i].first;
        ++code_hits[s];
        for (std::size_t d = 0; d < dim; ++d) code_grad[s * dim + d] += g.input.data[i * width + 3 + d];
      }
      for (std::size_t s = 0; s < n_shapes; ++s) {
        if (code_hits[s] == 0) continue;
        const double reg = 2.0 * config.code_reg_weight * code_hits[s] * inv_b;
        for (std::size_t d = 0; d < dim; ++d) code_grad[s * dim + d] += reg * codes[s * dim + d];
        const auto off = static_cast<std::ptrdiff_t>(s * dim);
        const std::span<double> block(codes.data() + off, dim);
        AdamHyper h = code_hyper;
        h.lr *= decay;
        adam_update(block, std::span<const double>(code_grad.data() + off, dim),
                    std::span<double>(code_m.data() + off, dim),
                    std::span<double>(code_v.data() + off, dim), ++code_steps[s], h);
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("train_decoder: loss diverged at epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(epoch_loss);
    if (log && (epoch % 50 == 0 || epoch + 1 == config.epochs)) {
      *log << "decoder epoch " << epoch << " loss " << epoch_loss << '\n';
    }
  }

  for (std::size_t s = 0; s < n_shapes; ++s) {
    result.codebook.instance_ids.push_back(shapes[s].instance_id);
    result.codebook.codes.emplace_back(codes.begin() + static_cast<std::ptrdiff_t>(s * dim),
                                       codes.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim));
  }
  return result;
}

std::vector<double> infer_code(const DecoderModel& model, const std::vector<SdfSample>& samples,
                               const InferCodeConfig& config) {
  if (config.iters < 0) throw UsageError("infer_code: negative iteration count");
  const std::size_t dim = static_cast<std::size_t>(model.latent_dim);
  std::mt19937_64 rng(derive_seed(config.seed, "infer_code"));
  std::normal_distribution<double> init(0.0, config.init_sigma);
  std::vector<double> code(dim);
  for (double& v : code) v = init(rng);
  if (config.iters == 0 || samples.empty()) return code;

  const std::size_t n = samples.size();
  const std::size_t width = 3 + dim;
  DenseArray in({n, width});
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (const auto& s : samples) pts.push_back(s.point);
  std::vector<double> m(dim, 0.0);
  std::vector<double> v(dim, 0.0);
  std::vector<double> grad(dim);
  ForwardCache cache;
  DenseArray out_grad({n, 1});
  const double clamp = model.sdf_clamp;
  for (int it = 1; it <= config.iters; ++it) {
    fill_inputs(in, pts, code);
    const DenseArray y = forward(model.mlp, in, &cache);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = clamp * y.data[i] - clamp_sdf(samples[i].sdf, clamp);
      loss += std::abs(diff);
      out_grad.data[i] = diff > 0.0 ? clamp / n : (diff < 0.0 ? -clamp / n : 0.0);
    }
    if (!std::isfinite(loss)) throw TrainingError("infer_code: loss diverged");
    const MlpGradients g = backward(model.mlp, cache, out_grad);
    for (std::size_t d = 0; d < dim; ++d) {
      double acc = 2.0 * config.code_reg_weight * code[d];
      for (std::size_t i = 0; i < n; ++i) acc += g.input.data[i * width + 3 + d];
      grad[d] = acc;
    }
    adam_update(code, grad, m, v, it, AdamHyper{config.lr});
  }
  return code;
}

void save_decoder(const std::filesystem::path& path, const DecoderModel& model) {
  Container c;
  c.kind = "decoder";
  c.set("latent_dim", std::to_string(model.latent_dim));
  {
    std::ostringstream os;
    os.precision(17);
    os << model.sdf_clamp;
    c.set("sdf_clamp", os.str());
  }
  put_mlp(c, model.mlp);
  save_container(path, c);
}

DecoderModel load_decoder(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (c.kind != "decoder") throw DataError(path.string() + ": not a decoder container");
  DecoderModel model;
  model.latent_dim = std::stoi(c.get("latent_dim"));
  model.sdf_clamp = std::stod(c.get("sdf_clamp"));
  model.mlp = get_mlp(c);
  if (model.mlp.input_width() != 3 + static_cast<std::size_t>(model.latent_dim) ||
      model.mlp.output_width() != 1) {
    throw DataError(path.string() + ": decoder network does not match latent_dim");
  }
  return model;
}

void save_codebook(const std::filesystem::path& path, const LatentCodebook& codebook) {
  const std::size_t dim = codebook.codes.empty() ? 0 : codebook.codes.front().size();
  Container c;
  c.kind = "codebook";
  c.set("latent_dim", std::to_string(dim));
  c.set("count", std::to_string(codebook.size()));
  DenseArray records({codebook.size(), 1 + dim});
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    if (codebook.codes[i].size() != dim) throw DimensionError("save_codebook: ragged codes");
    records(i, 0) = codebook.instance_ids[i];
    for (std::size_t d = 0; d < dim; ++d) records(i, 1 + d) = codebook.codes[i][d];
  }
  c.add_array("records", std::move(records));
  save_container(path, c);
}

LatentCodebook load_codebook(const std::filesystem::path& path) {
  const Container c = load_container(path);
  if (c.kind != "codebook") throw DataError(path.string() + ": not a codebook container");
  const DenseArray& rec = c.array("records");
  if (rec.rank() != 2 || rec.shape[1] < 1) throw DataError(path.string() + ": malformed records");
  LatentCodebook cb;
  for (std::size_t i = 0; i < rec.shape[0]; ++i) {
    cb.instance_ids.push_back(static_cast<int>(rec(i, 0)));
    std::vector<double> code(rec.shape[1] - 1);
    for (std::size_t d = 0; d < code.size(); ++d) code[d] = rec(i, 1 + d);
    cb.codes.push_back(std::move(code));
  }
  return cb;
}

}  // namespace usdf
