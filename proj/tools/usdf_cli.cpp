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

// usdf: train, reconstruct, fuse and evaluate uncertainty-aware shape models.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "usdf/evaluation.hpp"
#include "usdf/workflow.hpp"

namespace fs = std::filesystem;
using namespace usdf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Global {
  std::uint64_t seed = 0;
  bool quiet = false;
};

std::ostream* logger(const Global& g) { return g.quiet ? nullptr : &std::cerr; }

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

// The resolved configuration of the global options and the chosen subcommand.
void write_sidecar(const CLI::App& app, const CLI::App& sub, const fs::path& dir) {
  prepare_out_dir(dir);
  std::istringstream all(app.config_to_str(true, false));
  std::ofstream out = open_out(dir / "config.ini");
  out << "# resolved configuration for '" << sub.get_name() << "'\n";
  out << "format-version=1\n";
  std::string line;
  const std::string prefix = sub.get_name() + ".";
  while (std::getline(all, line)) {
    const auto eq = line.find('=');
    const std::string key = line.substr(0, eq);
    const bool global = key.find('.') == std::string::npos;
    if (key == "format-version") continue;
    if (global || key.rfind(prefix, 0) == 0) out << line << '\n';
  }
  if (!out) throw DataError("cannot write '" + (dir / "config.ini").string() + "'");
}

CameraRing make_ring(double elevation, double jitter) {
  CameraRing ring;
  ring.elevation = elevation;
  ring.elevation_jitter = jitter;
  return ring;
}

std::vector<ShapeSpec> split_shapes(const ShapeModel& model, const std::string& split) {
  if (split == "train") return model.split.train;
  if (split == "heldout") return model.split.heldout;
  if (split == "all") return model.family;
  throw UsageError("unknown split '" + split + "' (expected train, heldout or all)");
}

LatentCodebook split_codebook(const ShapeModel& model, const std::string& split) {
  if (split == "train") return model.codebook;
  if (split == "heldout") return model.heldout_codebook;
  LatentCodebook all = model.codebook;
  all.instance_ids.insert(all.instance_ids.end(), model.heldout_codebook.instance_ids.begin(),
                          model.heldout_codebook.instance_ids.end());
  all.codes.insert(all.codes.end(), model.heldout_codebook.codes.begin(),
                   model.heldout_codebook.codes.end());
  return all;
}

std::vector<ViewSample> crop_all(std::vector<ViewSample> views, double min_scale, std::uint64_t seed) {
  if (min_scale >= 1.0) return views;
  const std::uint64_t s = derive_seed(seed, "dataset_crop");
  for (std::size_t i = 0; i < views.size(); ++i) {
    views[i].view = corrupt_crop(views[i].view, min_scale, derive_seed(s, static_cast<std::uint64_t>(i)));
  }
  return views;
}

std::vector<ViewSample> views_of(const std::vector<ViewSample>& dataset, int instance, int max_views) {
  std::vector<ViewSample> out;
  for (const auto& s : dataset) {
    if (s.view.instance_id == instance) out.push_back(s);
  }
  if (out.empty()) throw DataError("dataset has no views of instance " + std::to_string(instance));
  if (max_views > 0 && static_cast<int>(out.size()) > max_views) out.resize(static_cast<std::size_t>(max_views));
  return out;
}

void write_latent_csv(std::ostream& out, const LatentGaussian& g) {
  out << "dim,mean,var\n" << std::setprecision(17);
  for (std::size_t d = 0; d < g.dim(); ++d) out << d << ',' << g.mean[d] << ',' << g.var[d] << '\n';
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

struct TrainDecoderArgs {
  fs::path out;
  ShapeModelConfig cfg;
};

void add_train_decoder(CLI::App& app, TrainDecoderArgs& a) {
  auto* s = app.add_subcommand("train-decoder", "Train the auto-decoder on a superellipsoid family");
  auto& c = a.cfg;
  s->add_option("--out", a.out, "Model directory")->required();
  s->add_option("--family-size", c.family_size, "Instances in the family")->capture_default_str();
  s->add_option("--heldout", c.heldout, "Instances held out of training")->capture_default_str();
  s->add_option("--latent-dim", c.decoder.latent_dim)->capture_default_str();
  s->add_option("--hidden", c.decoder.hidden, "Hidden widths")->delimiter(',')->capture_default_str();
  s->add_option("--sdf-clamp", c.decoder.sdf_clamp)->capture_default_str();
  s->add_option("--epochs", c.decoder.epochs)->capture_default_str();
  s->add_option("--points-per-shape", c.decoder.points_per_shape)->capture_default_str();
  s->add_option("--batch", c.decoder.batch_size)->capture_default_str();
  s->add_option("--lr-weights", c.decoder.lr_weights)->capture_default_str();
  s->add_option("--lr-codes", c.decoder.lr_codes)->capture_default_str();
  s->add_option("--code-reg", c.decoder.code_reg_weight)->capture_default_str();
  s->add_option("--surface-samples", c.surface_samples)->capture_default_str();
  s->add_option("--uniform-samples", c.uniform_samples)->capture_default_str();
  s->add_option("--surface-noise", c.surface_noise)->capture_default_str();
  s->add_option("--infer-iters", c.infer.iters)->capture_default_str();
  s->add_option("--infer-lr", c.infer.lr)->capture_default_str();
}

int run_train_decoder(const Global& g, TrainDecoderArgs& a) {
  a.cfg.seed = g.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const ShapeModel m = train_shape_model(a.cfg, logger(g));
  save_shape_model(a.out, m);
  std::cout << "trained decoder on " << m.split.train.size() << " shapes in " << std::fixed
            << std::setprecision(1) << elapsed(t0) << " s; final loss " << std::setprecision(6)
            << m.loss_trace.back() << "\nwrote " << a.out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  fs::path models;
  fs::path out;
  std::string split = "train";
  int views = 10;
  int resolution = 32;
  double elevation = 0.35;
  double jitter = 0.15;
  double min_scale = 1.0;
};

void add_render(CLI::App& app, RenderArgs& a) {
  auto* s = app.add_subcommand("render-dataset", "Render silhouette+depth views of family shapes");
  s->add_option("--models", a.models, "Model directory from train-decoder")->required();
  s->add_option("--out", a.out, "Dataset directory")->required();
  s->add_option("--split", a.split, "train, heldout or all")->capture_default_str();
  s->add_option("--views", a.views, "Views per instance")->capture_default_str();
  s->add_option("--resolution", a.resolution)->capture_default_str();
  s->add_option("--elevation", a.elevation, "Ring elevation (radians)")->capture_default_str();
  s->add_option("--elevation-jitter", a.jitter)->capture_default_str();
  s->add_option("--min-scale", a.min_scale, "Crop every view when below 1")->capture_default_str();
}

int run_render(const Global& g, const RenderArgs& a) {
  const ShapeModel m = load_shape_model(a.models);
  RenderOptions ro;
  ro.resolution = a.resolution;
  auto ds = make_view_dataset(split_shapes(m, a.split), split_codebook(m, a.split), a.views,
                              make_ring(a.elevation, a.jitter), derive_seed(g.seed, "render"), ro);
  ds = crop_all(std::move(ds), a.min_scale, g.seed);
  save_view_dataset(a.out, ds);
  std::cout << "rendered " << ds.size() << " views to " << a.out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainEncoderArgs {
  fs::path dataset;
  fs::path models;
  fs::path out;
  std::string loss = "es";
  bool no_augment = false;
  EncoderTrainConfig cfg;
};

void add_train_encoder(CLI::App& app, TrainEncoderArgs& a) {
  auto* s = app.add_subcommand("train-encoder", "Train the view encoder against the frozen codebook");
  auto& c = a.cfg;
  s->add_option("--dataset", a.dataset, "Dataset directory from render-dataset")->required();
  s->add_option("--models", a.models, "Model directory holding the codebooks")->required();
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--loss", a.loss, "nll or es")->capture_default_str()->check(CLI::IsMember({"nll", "es"}));
  s->add_option("--samples", c.mc_samples, "Monte-Carlo samples for the energy score")->capture_default_str();
  s->add_option("--epochs", c.epochs)->capture_default_str();
  s->add_option("--batch", c.batch_size)->capture_default_str();
  s->add_option("--lr", c.lr)->capture_default_str();
  s->add_option("--hidden", c.hidden, "Hidden widths")->delimiter(',')->capture_default_str();
  s->add_flag("--no-augment", a.no_augment, "Disable crop and flip augmentation");
  s->add_option("--crop-probability", c.augmentation.crop_probability)->capture_default_str();
  s->add_option("--min-scale-low", c.augmentation.min_scale_low)->capture_default_str();
  s->add_option("--flip-probability", c.augmentation.flip_probability)->capture_default_str();
  s->add_option("--mean-pretrain-epochs", c.mean_pretrain_epochs)->capture_default_str();
}

int run_train_encoder(const Global& g, TrainEncoderArgs& a) {
  const ShapeModel m = load_shape_model(a.models);
  const LatentCodebook all = split_codebook(m, "all");
  const auto ds = load_view_dataset(a.dataset, &all);
  a.cfg.loss = encoder_loss_from_string(a.loss);
  a.cfg.augment = !a.no_augment;
  a.cfg.seed = derive_seed(g.seed, "encoder");
  const auto t0 = std::chrono::steady_clock::now();
  const EncoderTrainResult r = train_encoder(ds, a.cfg, logger(g));
  save_encoder(a.out / "encoder.usdf", r.model);
  std::ofstream out = open_out(a.out / "encoder_loss.csv");
  out << "epoch,loss\n" << std::setprecision(10);
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) out << e << ',' << r.loss_trace[e] << '\n';
  std::cout << "trained " << a.loss << " encoder on " << ds.size() << " views in " << std::fixed
            << std::setprecision(1) << elapsed(t0) << " s\nwrote " << (a.out / "encoder.usdf").string()
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FuseArgs {
  fs::path encoder;
  fs::path dataset;
  fs::path out;
  int instance = 0;
  int max_views = 0;
  std::string fusion = "bayesian-k";
  int k = 4;
};

void add_fusion_options(CLI::App* s, FuseArgs& a) {
  s->add_option("--encoder", a.encoder, "encoder.usdf")->required();
  s->add_option("--dataset", a.dataset, "Dataset directory")->required();
  s->add_option("--instance", a.instance, "Instance whose views are fused")->required();
  s->add_option("--max-views", a.max_views, "Use at most this many views (0 = all)")->capture_default_str();
  s->add_option("--fusion", a.fusion, "average, bayesian or bayesian-k")
      ->capture_default_str()
      ->check(CLI::IsMember({"average", "bayesian", "bayesian-k"}));
  s->add_option("--k", a.k, "Views kept by bayesian-k")->capture_default_str();
  s->add_option("--out", a.out, "Output directory")->required();
}

struct FusedViews {
  std::vector<LatentGaussian> views;
  LatentGaussian fused;
  std::vector<std::size_t> selected;
};

FusedViews fuse_instance(const FuseArgs& a, const EncoderModel& enc) {
  const auto ds = views_of(load_view_dataset(a.dataset), a.instance, a.max_views);
  FusedViews f;
  for (const auto& s : ds) f.views.push_back(encode(enc, s.view));
  const FusionMode mode = fusion_mode_from_string(a.fusion);
  f.fused = fuse_views(f.views, mode, a.k);
  if (mode == FusionMode::bayesian_k) {
    f.selected = select_bayesian_k(f.views, std::min<int>(a.k, static_cast<int>(f.views.size()))).selected;
  } else {
    for (std::size_t i = 0; i < f.views.size(); ++i) f.selected.push_back(i);
  }
  return f;
}

int run_fuse(const Global&, const FuseArgs& a) {
  const EncoderModel enc = load_encoder(a.encoder);
  const FusedViews f = fuse_instance(a, enc);
  std::ofstream lat = open_out(a.out / "fused_latent.csv");
  write_latent_csv(lat, f.fused);
  std::ofstream tr = open_out(a.out / "fusion_trace.csv");
  write_fusion_trace(tr, f.views, f.selected);
  std::cout << "fused " << f.views.size() << " views of instance " << a.instance << " (" << a.fusion
            << "); posterior trace " << f.fused.trace() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReconstructArgs {
  FuseArgs fuse;
  fs::path models;
  int samples = 10;
  int resolution = 64;
  bool obj = false;
};

void add_reconstruct(CLI::App& app, ReconstructArgs& a) {
  auto* s = app.add_subcommand("reconstruct", "Views -> fused latent -> mesh with per-vertex uncertainty");
  add_fusion_options(s, a.fuse);
  s->add_option("--models", a.models, "Model directory")->required();
  s->add_option("--samples", a.samples, "Monte-Carlo samples for vertex uncertainty")->capture_default_str();
  s->add_option("--resolution", a.resolution, "Marching-cubes lattice resolution")->capture_default_str();
  s->add_flag("--obj", a.obj, "Also write geometry as OBJ");
}

int run_reconstruct(const Global& g, const ReconstructArgs& a) {
  const ShapeModel m = load_shape_model(a.models);
  const EncoderModel enc = load_encoder(a.fuse.encoder);
  if (enc.latent_dim != m.decoder.latent_dim) {
    throw DataError("encoder and decoder latent dimensions differ");
  }
  const FusedViews f = fuse_instance(a.fuse, enc);
  const DecoderField field(m.decoder);
  const auto values = decode_grid(field, f.fused.mean, a.resolution);
  const TriMesh mesh = marching_cubes(unit_grid(values, a.resolution));
  const UncertainMesh um = attach_uncertainty(mesh, field, f.fused, a.samples, derive_seed(g.seed, "vertex_sigma"));
  export_ply(a.fuse.out / "mesh.ply", um);
  if (a.obj) export_obj(a.fuse.out / "mesh.obj", mesh);
  std::ofstream tr = open_out(a.fuse.out / "fusion_trace.csv");
  write_fusion_trace(tr, f.views, f.selected);

  const ShapeSpec& spec = find_shape(m.family, a.fuse.instance);
  const double score = iou(voxelize(mesh), voxelize(spec));
  double mean_sigma = 0.0;
  for (double s : um.vertex_sigma) mean_sigma += s;
  if (!um.vertex_sigma.empty()) mean_sigma /= static_cast<double>(um.vertex_sigma.size());
  std::ofstream rep = open_out(a.fuse.out / "report.csv");
  rep << "instance_id,views,fusion,k,vertices,triangles,iou,posterior_trace,mean_vertex_sigma\n"
      << std::setprecision(10) << a.fuse.instance << ',' << f.views.size() << ',' << a.fuse.fusion << ','
      << a.fuse.k << ',' << um.vertices.size() << ',' << um.triangles.size() << ',' << score << ','
      << f.fused.trace() << ',' << mean_sigma << '\n';
  std::cout << "instance " << a.fuse.instance << ": " << um.vertices.size() << " vertices, IoU " << score
            << ", mean vertex sigma " << mean_sigma << "\nwrote " << (a.fuse.out / "mesh.ply").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  fs::path models;
  fs::path encoder;
  fs::path out;
  std::string split = "all";
  int views = 10;
  std::vector<double> min_scales{1.0, 0.8, 0.4, 0.2, 0.1};
  int k = 4;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool no_point_metrics = false;
  std::string score_split = "heldout";
  int sdf_samples = 64;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  auto* s = app.add_subcommand("evaluate", "Fusion comparison over a crop sweep and SDF-space scores");
  s->add_option("--models", a.models, "Model directory")->required();
  s->add_option("--encoder", a.encoder, "encoder.usdf")->required();
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--split", a.split, "Instances reconstructed: train, heldout or all")->capture_default_str();
  s->add_option("--views", a.views, "Views per instance")->capture_default_str();
  s->add_option("--min-scales", a.min_scales, "Crop sweep")->delimiter(',')->capture_default_str();
  s->add_option("--k", a.k, "K for bayesian-k")->capture_default_str();
  s->add_option("--seeds", a.seeds, "Experiment seeds")->delimiter(',')->capture_default_str();
  s->add_flag("--no-point-metrics", a.no_point_metrics, "Skip Chamfer and EMD");
  s->add_option("--score-split", a.score_split, "Instances whose views are scored in SDF space")
      ->capture_default_str();
  s->add_option("--sdf-samples", a.sdf_samples, "Monte-Carlo samples per view for SDF scores")
      ->capture_default_str();
}

// Views are rendered at the resolution the encoder was trained on.
RenderOptions render_for(const EncoderModel& enc) {
  if (enc.height != enc.width) throw DataError("encoder expects non-square views");
  RenderOptions ro;
  ro.resolution = enc.width;
  return ro;
}

int run_evaluate(const Global& g, const EvaluateArgs& a) {
  const ShapeModel m = load_shape_model(a.models);
  const EncoderModel enc = load_encoder(a.encoder);
  const auto shapes = split_shapes(m, a.split);
  std::vector<ExperimentReport> reports;
  for (double c : a.min_scales) {
    ExperimentConfig xc;
    xc.views = a.views;
    xc.min_scale = c;
    xc.k = a.k;
    xc.seeds.clear();
    for (auto s : a.seeds) xc.seeds.push_back(derive_seed(g.seed, s));
    xc.point_metrics = !a.no_point_metrics;
    xc.render = render_for(enc);
    reports.push_back(run_experiment(m.decoder, enc, shapes, xc, logger(g)));
    if (logger(g)) *logger(g) << "min_scale " << c << " done\n";
  }
  {
    std::ofstream out = open_out(a.out / "table_min_scale.csv");
    write_min_scale_table_csv(out, reports);
  }
  {
    std::ofstream out = open_out(a.out / "table_methods.csv");
    write_method_table_csv(out, {reports.front()});
  }
  {
    std::ofstream out = open_out(a.out / "instances.csv");
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::ostringstream block;
      write_instance_csv(block, reports[i]);
      std::string text = block.str();
      if (i > 0) text = text.substr(text.find('\n') + 1);
      out << text;
    }
  }

  // SDF-space scores of single-view predictions against the equal-variance baseline.
  const auto scored = split_shapes(m, a.score_split);
  const auto ds = make_view_dataset(scored, split_codebook(m, a.score_split), a.views, CameraRing{},
                                    derive_seed(g.seed, "score_views"), render_for(enc));
  std::vector<LatentGaussian> latents;
  std::vector<ShapeSpec> specs;
  for (const auto& s : ds) {
    latents.push_back(encode(enc, s.view));
    specs.push_back(find_shape(m.family, s.view.instance_id));
  }
  SdfPredictionConfig pc;
  pc.samples = a.sdf_samples;
  pc.seed = derive_seed(g.seed, "sdf_points");
  const SdfPredictions ours = predict_sdf(m.decoder, latents, specs, pc);
  pc.equal_variance = true;
  const SdfPredictions base = predict_sdf(m.decoder, latents, specs, pc);
  const std::uint64_t es_seed = derive_seed(g.seed, "sdf_es");
  const double clamp = m.decoder.sdf_clamp;
  std::ofstream out = open_out(a.out / "sdf_scores.csv");
  write_sdf_scores_csv(out, {"Equal Var", "Ours"},
                       {score_predictions(base, clamp, a.sdf_samples, es_seed),
                        score_predictions(ours, clamp, a.sdf_samples, es_seed)});
  std::cout << "wrote table_min_scale.csv, table_methods.csv, instances.csv, sdf_scores.csv to "
            << a.out.string() << '\n';
  for (const auto& s : reports.back().summary) {
    std::cout << "  min_scale " << reports.back().config.min_scale << ' ' << method_label(s.mode, a.k)
              << " IoU " << s.mean_iou << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  fs::path models;
  fs::path encoder;
  fs::path out;
  std::string split = "heldout";
  int views = 10;
  double min_scale = 1.0;
  int samples = 64;
  int points = kCalibrationPoints;
};

void add_calibrate(CLI::App& app, CalibrateArgs& a) {
  auto* s = app.add_subcommand("calibrate", "Latent-space and SDF-space calibration curves");
  s->add_option("--models", a.models, "Model directory")->required();
  s->add_option("--encoder", a.encoder, "encoder.usdf")->required();
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--split", a.split, "train, heldout or all")->capture_default_str();
  s->add_option("--views", a.views, "Views per instance")->capture_default_str();
  s->add_option("--min-scale", a.min_scale, "Crop views when below 1")->capture_default_str();
  s->add_option("--samples", a.samples, "Monte-Carlo samples per view in SDF space")->capture_default_str();
  s->add_option("--points", a.points, "Probability levels T")->capture_default_str();
}

int run_calibrate(const Global& g, const CalibrateArgs& a) {
  const ShapeModel m = load_shape_model(a.models);
  const EncoderModel enc = load_encoder(a.encoder);
  auto ds = make_view_dataset(split_shapes(m, a.split), split_codebook(m, a.split), a.views, CameraRing{},
                              derive_seed(g.seed, "calibration_views"), render_for(enc));
  ds = crop_all(std::move(ds), a.min_scale, g.seed);
  std::vector<LatentGaussian> latents, flat;
  std::vector<std::vector<double>> targets;
  std::vector<ShapeSpec> specs;
  for (const auto& s : ds) {
    latents.push_back(encode(enc, s.view));
    LatentGaussian unit = latents.back();
    std::fill(unit.var.begin(), unit.var.end(), 1.0);
    flat.push_back(unit);
    targets.push_back(s.gt_code);
    specs.push_back(find_shape(m.family, s.view.instance_id));
  }
  auto write = [&](const char* name, const CalibrationCurve& c) {
    std::ofstream out = open_out(a.out / name);
    write_calibration_csv(out, c);
  };
  write("calibration_latent.csv", calibration_curve(latents, targets, a.points));
  write("calibration_latent_equal_var.csv", calibration_curve(flat, targets, a.points));
  SdfPredictionConfig pc;
  pc.samples = a.samples;
  pc.seed = derive_seed(g.seed, "calibration_points");
  write("calibration_sdf.csv", sdf_calibration(predict_sdf(m.decoder, latents, specs, pc),
                                               m.decoder.sdf_clamp, a.points));
  pc.equal_variance = true;
  write("calibration_sdf_equal_var.csv", sdf_calibration(predict_sdf(m.decoder, latents, specs, pc),
                                                         m.decoder.sdf_clamp, a.points));
  std::cout << "wrote latent and SDF calibration curves for " << ds.size() << " views to "
            << a.out.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware neural SDF reconstruction"};
  app.set_config("--config", "", "Read options from an INI/TOML file; flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  Global global;
  app.add_option("--seed", global.seed, "Root seed for every random stream")->capture_default_str();
  app.add_flag("--quiet", global.quiet, "No progress output");
  // Written into every config.ini so a replayed sidecar parses; only version 1 exists.
  int format_version = 1;
  app.add_option("--format-version", format_version)->check(CLI::Range(1, 1))->group("");

  TrainDecoderArgs td;
  RenderArgs rd;
  TrainEncoderArgs te;
  ReconstructArgs rc;
  FuseArgs fu;
  EvaluateArgs ev;
  CalibrateArgs ca;
  add_train_decoder(app, td);
  add_train_encoder(app, te);
  add_reconstruct(app, rc);
  add_fusion_options(app.add_subcommand("fuse", "Fuse the views of one instance in latent space"), fu);
  add_evaluate(app, ev);
  add_calibrate(app, ca);
  add_render(app, rd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const fs::path out = name == "train-decoder"    ? td.out
                         : name == "render-dataset" ? rd.out
                         : name == "train-encoder"  ? te.out
                         : name == "reconstruct"    ? rc.fuse.out
                         : name == "fuse"           ? fu.out
                         : name == "evaluate"       ? ev.out
                                                    : ca.out;
    write_sidecar(app, *sub, out);
    if (name == "train-decoder") return run_train_decoder(global, td);
    if (name == "render-dataset") return run_render(global, rd);
    if (name == "train-encoder") return run_train_encoder(global, te);
    if (name == "reconstruct") return run_reconstruct(global, rc);
    if (name == "fuse") return run_fuse(global, fu);
    if (name == "evaluate") return run_evaluate(global, ev);
    return run_calibrate(global, ca);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
