#include "icepose/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "icepose/checkpoint.hpp"
#include "icepose/dataset.hpp"
#include "icepose/errors.hpp"
#include "icepose/metrics.hpp"
#include "icepose/scene_export.hpp"
#include "icepose/settings.hpp"
#include "icepose/train.hpp"

namespace icepose {

namespace {

KeyValues load_config(const std::string& path) {
  if (path.empty()) return {};
  return KeyValues::parse_file(path);
}

void run_phantom(const std::string& config_path, std::uint64_t seed, bool seed_given,
                 const std::string& out) {
  const KeyValues kv = load_config(config_path);
  const std::uint64_t use_seed = seed_given ? seed : kv.get_u64("master_seed", 42);
  const AnatomyPhantom ph = generate_phantom(use_seed, phantom_ranges_from(kv));
  write_phantom_file(ph, out);
  std::printf("phantom seed %llu written to %s\n",
              static_cast<unsigned long long>(use_seed), out.c_str());
}

void run_dataset(const std::string& config_path, const std::string& out) {
  const KeyValues kv = load_config(config_path);
  const DatasetConfig cfg = dataset_config_from(kv);
  const DatasetManifest m = build_dataset(cfg, out);
  std::printf("dataset written to %s (train %lld, val %lld, test %lld)\n", out.c_str(),
              static_cast<long long>(m.train.total), static_cast<long long>(m.val.total),
              static_cast<long long>(m.test.total));
}

void run_train(const std::string& config_path, const std::string& dataset_dir,
               const std::string& out) {
  const KeyValues kv = load_config(config_path);
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const ViTConfig vit = vit_config_from(kv);
  const TrainConfig cfg = train_config_from(kv);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out);

  const TrainResult result = train(cfg, vit, manifest, out);
  for (size_t e = 0; e < result.epoch_train_loss.size(); ++e) {
    std::printf("epoch %zu  train_loss %.6g", e + 1, result.epoch_train_loss[e]);
    if (e < result.epoch_val_loss.size())
      std::printf("  val_loss %.6g", result.epoch_val_loss[e]);
    std::printf("\n");
  }
  std::printf("checkpoint written to %s/ckpt_final.bin (%lld steps)\n", out.c_str(),
              static_cast<long long>(result.steps));
}

void run_eval(const std::string& config_path, const std::string& dataset_dir,
              const std::string& checkpoint, bool use_baseline, const std::string& split,
              const std::string& out_prefix) {
  load_config(config_path);  // accepted everywhere; eval takes no keys from it
  const DatasetManifest manifest = load_manifest(dataset_dir);

  MetricsReport report;
  if (use_baseline) {
    report = evaluate_constant(baseline_predictor(manifest), manifest, split);
  } else {
    if (checkpoint.empty())
      throw ConfigError("eval requires --checkpoint (or --baseline)");
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    report = evaluate(ckpt.params, ckpt.config, manifest, split);
  }
  std::fputs(format_report(report).c_str(), stdout);
  if (!out_prefix.empty()) {
    write_report_files(report, out_prefix);
    std::printf("report written to %s.txt and %s.csv\n", out_prefix.c_str(),
                out_prefix.c_str());
  }
}

void run_export_scene(const std::string& config_path, const std::string& dataset_dir,
                      const std::string& split, std::int64_t index,
                      const std::string& checkpoint, const std::string& out, int grid,
                      int fan_rays, int fan_samples) {
  load_config(config_path);
  const DatasetManifest manifest = load_manifest(dataset_dir);
  const SampleRecord rec = read_record(manifest, split, index);

  const AnatomyPhantom world_phantom =
      generate_phantom(subject_phantom_seed(manifest.config.master_seed, rec.subject_id),
                       manifest.config.phantom_ranges);
  const RigidTransform to_mesh =
      world_to_mesh(world_phantom, manifest.config.rotational_alignment);
  // Everything is drawn in anatomy-relative (mesh) coordinates.
  const AnatomyPhantom mesh_phantom = transformed(world_phantom, invert(to_mesh));

  FanGeometry fan = manifest.config.fan;
  if (fan_rays > 0) fan.ray_count = fan_rays;
  if (fan_samples > 0) fan.samples_per_ray = fan_samples;

  const RigidTransform gt{rec.pose_mesh.orientation, rec.pose_mesh.position};

  if (!checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    autodiff::Tensor image = autodiff::Tensor::zeros(
        {1, manifest.config.fan.image_h, manifest.config.fan.image_w});
    for (size_t i = 0; i < rec.pixels.size(); ++i)
      image[static_cast<Eigen::Index>(i)] = static_cast<double>(rec.pixels[i]);
    const PosePrediction pred = predict(ckpt.params, ckpt.config, image)[0];
    const RigidTransform pred_pose{decode_rot6d(pred.o_hat), pred.p_hat};
    export_scene(mesh_phantom, gt, &pred_pose, fan, out, grid);
  } else {
    export_scene(mesh_phantom, gt, nullptr, fan, out, grid);
  }
  std::printf("scene written to %s\n", out.c_str());
}

int run_gradcheck(std::uint64_t seed, double tol) {
  const GradCheckResult r = gradcheck_vit(micro_vit_config(), seed);
  std::printf("gradcheck: %lld parameters, max relative error %.3g (tolerance %.3g)\n",
              static_cast<long long>(r.params_checked), r.max_rel_error, tol);
  if (r.max_rel_error < tol) {
    std::printf("gradcheck PASS\n");
    return 0;
  }
  std::fprintf(stderr, "gradcheck FAIL\n");
  return 2;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Synthetic ICE-fan pose estimation: phantom rendering, dataset "
               "generation, ViT training, evaluation, and scene export"};
  app.require_subcommand(1);

  std::string config_path, out_path, dataset_dir, checkpoint, split = "test";
  std::uint64_t seed = 42;
  std::int64_t index = 0;
  int grid = 64, fan_rays = 0, fan_samples = 0;
  bool baseline = false;
  double tol = 1e-4;

  auto* phantom_cmd = app.add_subcommand("phantom", "Generate a phantom parameter file");
  phantom_cmd->add_option("--config", config_path, "key = value config file");
  auto* seed_opt = phantom_cmd->add_option("--seed", seed, "phantom seed");
  phantom_cmd->add_option("--out", out_path, "output phantom file")->required();

  auto* dataset_cmd = app.add_subcommand("dataset", "Generate a synthetic dataset");
  dataset_cmd->add_option("--config", config_path, "key = value config file");
  dataset_cmd->add_option("--out", out_path, "output dataset directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the regressor on a dataset");
  train_cmd->add_option("--config", config_path, "key = value config file");
  train_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  train_cmd->add_option("--out", out_path, "output directory for checkpoints and logs")
      ->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or the baseline");
  eval_cmd->add_option("--config", config_path, "key = value config file");
  eval_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file");
  eval_cmd->add_flag("--baseline", baseline, "evaluate the constant baseline predictor");
  eval_cmd->add_option("--split", split, "train, val, or test (default test)");
  eval_cmd->add_option("--out", out_path, "report prefix (writes .txt and .csv)");

  auto* export_cmd = app.add_subcommand("export-scene", "Export an OBJ scene for a sample");
  export_cmd->add_option("--config", config_path, "key = value config file");
  export_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  export_cmd->add_option("--split", split, "train, val, or test (default test)");
  export_cmd->add_option("--index", index, "record index within the split");
  export_cmd->add_option("--checkpoint", checkpoint, "checkpoint for the predicted fan");
  export_cmd->add_option("--out", out_path, "output OBJ path")->required();
  export_cmd->add_option("--grid", grid, "isosurface grid resolution (default 64)");
  export_cmd->add_option("--fan-rays", fan_rays, "override fan ray count for the sheets");
  export_cmd->add_option("--fan-samples", fan_samples, "override samples per ray");

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Check autodiff against finite differences");
  gradcheck_cmd->add_option("--config", config_path, "key = value config file");
  gradcheck_cmd->add_option("--seed", seed, "randomization seed");
  gradcheck_cmd->add_option("--tol", tol, "maximum relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (phantom_cmd->parsed())
      run_phantom(config_path, seed, seed_opt->count() > 0, out_path);
    else if (dataset_cmd->parsed())
      run_dataset(config_path, out_path);
    else if (train_cmd->parsed())
      run_train(config_path, dataset_dir, out_path);
    else if (eval_cmd->parsed())
      run_eval(config_path, dataset_dir, checkpoint, baseline, split, out_path);
    else if (export_cmd->parsed())
      run_export_scene(config_path, dataset_dir, split, index, checkpoint, out_path, grid,
                       fan_rays, fan_samples);
    else if (gradcheck_cmd->parsed())
      return run_gradcheck(seed, tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace icepose
