#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "litept/gradcheck.hpp"
#include "litept/profiler.hpp"

namespace litept::cli {

namespace detail {

struct ModelFlags {
  std::string model = "s";
  double rope_base = 100.0;
  std::string rope_mode = "cartesian";
  std::string rope_split;
  std::string curve;
  bool no_rope = false;
  int in_channels = -1;
  int num_classes = -1;
  double grid_size = 0.02;

  void attach(CLI::App* app, bool with_grid = true) {
    app->add_option("--model", model, "model preset: s, s-star, b, l, micro")
        ->check(CLI::IsMember({"s", "s-star", "b", "l", "micro"}));
    app->add_option("--rope-base", rope_base, "PointROPE base frequency (default 100)");
    app->add_option("--rope-mode", rope_mode, "PointROPE coordinate mode")
        ->check(CLI::IsMember({"cartesian", "spherical"}));
    app->add_option("--rope-split", rope_split, "per-axis rope sub-dimensions, dx:dy:dz");
    app->add_option("--curve", curve, "pin a single serialization curve")
        ->check(CLI::IsMember({"z", "z-trans", "hilbert", "hilbert-trans"}));
    app->add_flag("--no-rope", no_rope, "disable PointROPE (identity positional map)");
    app->add_option("--in-channels", in_channels, "input feature channels (preset default otherwise)");
    app->add_option("--classes", num_classes, "segmentation class count (preset default otherwise)");
    if (with_grid) app->add_option("--grid-size", grid_size, "voxel grid size in meters (default 0.02)");
  }

  ModelConfig build() const {
    ModelConfig cfg = preset(model);
    cfg.rope_base = rope_base;
    cfg.rope_mode = rope_mode == "spherical" ? RopeMode::Spherical : RopeMode::Cartesian;
    if (!rope_split.empty()) {
      std::array<int, 3> split{};
      char c1, c2;
      std::istringstream ss(rope_split);
      if (!(ss >> split[0] >> c1 >> split[1] >> c2 >> split[2]) || c1 != ':' || c2 != ':')
        throw ConfigError(cat("cannot parse --rope-split '", rope_split, "', expected dx:dy:dz"));
      cfg.rope_split = split;
    }
    if (!curve.empty()) {
      if (curve == "z") cfg.curve_override = CurveKind::ZOrder;
      if (curve == "z-trans") cfg.curve_override = CurveKind::ZOrderTrans;
      if (curve == "hilbert") cfg.curve_override = CurveKind::Hilbert;
      if (curve == "hilbert-trans") cfg.curve_override = CurveKind::HilbertTrans;
    }
    cfg.rope_enabled = !no_rope;
    if (in_channels > 0) cfg.in_channels = in_channels;
    if (num_classes > 0) cfg.num_classes = num_classes;
    cfg.grid_size = grid_size;
    cfg.validate();
    return cfg;
  }
};

inline std::ostream& sink(std::optional<std::ofstream>& file, const std::string& path,
                          std::ostream& fallback) {
  if (path.empty()) return fallback;
  file.emplace(path);
  require<IoError>(file->good(), "cannot write ", path);
  return *file;
}

}  // namespace detail

/// Single entry point behind the binary; returns the process exit code.
/// 0 = success, 1 = usage error, 2 = runtime or data error.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LitePT point-cloud backbone engine"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for parallel kernels (default 1)");

  // params
  auto* params_cmd = app.add_subcommand("params", "analytic parameter breakdown");
  detail::ModelFlags params_flags;
  params_flags.attach(params_cmd, false);
  std::string params_format = "text";
  std::string params_out;
  params_cmd->add_option("--format", params_format, "text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  params_cmd->add_option("--out", params_out, "write the report to a file instead of stdout");

  // forward
  auto* fwd_cmd = app.add_subcommand("forward", "run inference on a scene");
  detail::ModelFlags fwd_flags;
  fwd_flags.attach(fwd_cmd);
  std::string fwd_input, fwd_output, fwd_weights;
  std::uint64_t fwd_seed = 1;
  bool fwd_ascii_labels = false;
  fwd_cmd->add_option("--input", fwd_input, "scene file (.lptc binary or ASCII)")->required();
  fwd_cmd->add_option("--out", fwd_output, "logits output file (.lptc or ASCII)")->required();
  fwd_cmd->add_option("--weights", fwd_weights, "LPTW checkpoint; omitted = seeded init");
  fwd_cmd->add_option("--seed", fwd_seed, "weight init seed (default 1)");
  fwd_cmd->add_flag("--ascii-labels", fwd_ascii_labels, "treat the last ASCII column as a label");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "latency breakdown on a synthetic scene");
  detail::ModelFlags bench_flags;
  bench_flags.attach(bench_cmd);
  index_t bench_points = 100000;
  double bench_extent = 2.0;
  int bench_reps = 30, bench_warmup = 5;
  std::uint64_t bench_seed = 1;
  std::string bench_format = "text", bench_out;
  bench_cmd->add_option("--points", bench_points, "synthetic scene size (default 100000)");
  bench_cmd->add_option("--extent", bench_extent, "scene extent in meters (default 2)");
  bench_cmd->add_option("--reps", bench_reps, "timed repetitions (default 30)");
  bench_cmd->add_option("--warmup", bench_warmup, "discarded warmup runs (default 5)");
  bench_cmd->add_option("--seed", bench_seed, "scene/weight seed (default 1)");
  bench_cmd->add_option("--format", bench_format, "text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  bench_cmd->add_option("--out", bench_out, "write the report to a file instead of stdout");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  detail::ModelFlags grad_flags;
  grad_flags.model = "micro";
  grad_flags.attach(grad_cmd);
  std::uint64_t grad_seed = 1;
  int grad_samples = 30;
  index_t grad_points = 160;
  grad_cmd->add_option("--seed", grad_seed, "seed (default 1)");
  grad_cmd->add_option("--samples", grad_samples, "sampled parameter entries (default 30)");
  grad_cmd->add_option("--points", grad_points, "synthetic scene size (default 160)");

  // train-toy
  auto* train_cmd = app.add_subcommand("train-toy", "overfit the micro preset on a slab scene");
  detail::ModelFlags train_flags;
  train_flags.model = "micro";
  train_flags.attach(train_cmd);
  int train_steps = 300;
  double train_lr = 1e-3, train_wd = 0.05, train_extent = 2.0;
  std::uint64_t train_seed = 1;
  index_t train_points = 2000;
  std::string train_out, train_save;
  train_cmd->add_option("--steps", train_steps, "training steps (default 300)");
  train_cmd->add_option("--lr", train_lr, "learning rate (default 1e-3)");
  train_cmd->add_option("--wd", train_wd, "decoupled weight decay (default 0.05)");
  train_cmd->add_option("--seed", train_seed, "scene + init seed (default 1)");
  train_cmd->add_option("--points", train_points, "scene size (default 2000)");
  train_cmd->add_option("--extent", train_extent, "scene extent in meters (default 2)");
  train_cmd->add_option("--out", train_out, "write the CSV loss curve here instead of stdout");
  train_cmd->add_option("--save-weights", train_save, "write the final weights to an LPTW checkpoint");

  // make-scene
  auto* scene_cmd = app.add_subcommand("make-scene", "generate a labeled synthetic scene");
  std::uint64_t scene_seed = 1;
  index_t scene_points = 2000;
  double scene_extent = 2.0;
  int scene_classes = 4;
  std::string scene_out;
  scene_cmd->add_option("--seed", scene_seed, "PRNG seed (default 1)");
  scene_cmd->add_option("--points", scene_points, "point count (default 2000)");
  scene_cmd->add_option("--extent", scene_extent, "cube edge in meters (default 2)");
  scene_cmd->add_option("--classes", scene_classes, "slab class count (default 4)");
  scene_cmd->add_option("--out", scene_out, "output file (.lptc binary or ASCII)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (const char* env = std::getenv("LITEPT_THREADS")) {
      const int n = std::atoi(env);
      require<ConfigError>(n >= 1, "LITEPT_THREADS must be a positive integer, got '", env, "'");
      threads = n;
    }
    require<ConfigError>(threads >= 1, "--threads must be >= 1, got ", threads);
    thread_count() = threads;

    if (params_cmd->parsed()) {
      const ModelConfig cfg = params_flags.build();
      const ProfileReport report = profile_params(cfg);
      std::optional<std::ofstream> file;
      emit_report(report, parse_report_format(params_format), detail::sink(file, params_out, out));
      return 0;
    }

    if (fwd_cmd->parsed()) {
      PointBatch scene = read_scene(fwd_input, fwd_ascii_labels);
      detail::ModelFlags flags = fwd_flags;
      if (flags.in_channels <= 0 && scene.features.cols() > 0)
        flags.in_channels = static_cast<int>(scene.features.cols());
      const ModelConfig cfg = flags.build();
      if (!scene.voxelized()) scene = voxelize(scene, cfg.grid_size);
      ModelWeights weights = build_model(cfg, fwd_seed);
      if (!fwd_weights.empty()) load_weights(weights, fwd_weights);
      const ForwardRun run = forward(weights, scene);
      PointBatch result;
      result.coords = scene.coords;
      result.features = run.logits.value();
      result.batch_offsets = scene.batch_offsets;
      result.grid_size = scene.grid_size;
      result.labels.resize(static_cast<std::size_t>(result.features.rows()));
      for (index_t r = 0; r < result.features.rows(); ++r) {
        index_t best = 0;
        for (index_t c = 1; c < result.features.cols(); ++c)
          if (result.features(r, c) > result.features(r, best)) best = c;
        result.labels[static_cast<std::size_t>(r)] = static_cast<std::uint16_t>(best);
      }
      write_scene(result, fwd_output);
      out << "wrote " << result.features.rows() << " x " << result.features.cols() << " logits to "
          << fwd_output << "\n";
      return 0;
    }

    if (bench_cmd->parsed()) {
      const ModelConfig cfg = [&] {
        detail::ModelFlags flags = bench_flags;
        if (flags.in_channels <= 0) flags.in_channels = 3;  // synthetic scenes carry xyz features
        return flags.build();
      }();
      PointBatch scene = make_synthetic_scene(bench_seed, bench_points, bench_extent, cfg.num_classes);
      scene = voxelize(scene, cfg.grid_size);
      ModelWeights weights = build_model(cfg, bench_seed);
      const ProfileReport report = profile_latency(weights, scene, bench_reps, bench_warmup);
      std::optional<std::ofstream> file;
      emit_report(report, parse_report_format(bench_format), detail::sink(file, bench_out, out));
      return 0;
    }

    if (grad_cmd->parsed()) {
      detail::ModelFlags flags = grad_flags;
      if (flags.in_channels <= 0) flags.in_channels = 3;
      const ModelConfig cfg = flags.build();
      const GradCheckResult res = model_grad_check(cfg, grad_seed, grad_samples, grad_points);
      const bool pass = res.max_rel_err < 1e-3;
      out << "max relative error " << res.max_rel_err << " over " << res.samples << " parameters: "
          << (pass ? "PASS" : "FAIL") << "\n";
      return pass ? 0 : 2;
    }

    if (train_cmd->parsed()) {
      detail::ModelFlags flags = train_flags;
      if (flags.in_channels <= 0) flags.in_channels = 3;
      const ModelConfig cfg = flags.build();
      PointBatch scene = make_synthetic_scene(train_seed, train_points, train_extent, cfg.num_classes);
      scene = voxelize(scene, cfg.grid_size);
      std::optional<std::ofstream> file;
      std::ostream& csv = detail::sink(file, train_out, out);
      ModelWeights trained;
      const ToyTrainResult res = train_toy(cfg, scene, train_steps, train_lr, train_seed, &csv,
                                           train_wd, train_save.empty() ? nullptr : &trained);
      if (!train_save.empty()) save_weights(trained, train_save);
      out << "final_accuracy=" << res.final_accuracy << "\n";
      out << "final_loss=" << res.losses.back() << "\n";
      return 0;
    }

    if (scene_cmd->parsed()) {
      PointBatch scene = make_synthetic_scene(scene_seed, scene_points, scene_extent, scene_classes);
      write_scene(scene, scene_out);
      out << "wrote " << scene.num_points() << " points to " << scene_out << "\n";
      return 0;
    }

    err << "error: no subcommand\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace litept::cli
