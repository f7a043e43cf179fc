#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "dtu/commands.hpp"
#include "dtu/trainer.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DTU-Net curvilinear structure segmentation toolkit"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the dual-network model");
  std::string config_path, train_manifest, val_manifest, out_dir, resume_from, drive_root;
  bool full_drive = false;
  dtu::RunConfig run;
  train->add_option("--config", config_path, "JSON run config (CLI flags override it)");
  train->add_option("--manifest", train_manifest, "training dataset manifest");
  train->add_option("--val-manifest", val_manifest, "validation dataset manifest");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--resume", resume_from, "checkpoint to resume from");
  train->add_flag("--full-drive", full_drive,
                  "train on DRIVE under --data-root; records results next to the published "
                  "table, no pass/fail semantics");
  train->add_option("--data-root", drive_root, "DRIVE root (default: env DTU_DATA_ROOT)");
  double lr = -1, tau = -1, omega = -1, lambda_start = -1, lambda_end = -1, triplet_weight = -1;
  int epochs = -1, batch = -1, base_channels = -1, depth = -1, patch_size = -1, seed = -1;
  train->add_option("--lr", lr);
  train->add_option("--epochs", epochs);
  train->add_option("--batch", batch);
  train->add_option("--base-channels", base_channels);
  train->add_option("--depth", depth);
  train->add_option("--tau", tau);
  train->add_option("--omega", omega);
  train->add_option("--lambda-start", lambda_start);
  train->add_option("--lambda-end", lambda_end);
  train->add_option("--patch-size", patch_size);
  train->add_option("--triplet-weight", triplet_weight, "0 disables the triplet term");
  train->add_option("--seed", seed);

  // --- predict --------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Run inference and fusion");
  dtu::cli::PredictArgs pargs;
  predict->add_option("--checkpoint", pargs.checkpoint)->required();
  predict->add_option("--images", pargs.images, "manifest.json, directory, or single PNG")
      ->required();
  predict->add_option("--out", pargs.out_dir)->required();
  predict->add_option("--omega", pargs.omega);
  predict->add_option("--window", pargs.patches.test_window);
  predict->add_option("--stride", pargs.patches.test_stride);

  // --- eval -----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  dtu::cli::EvalArgs eargs;
  eval->add_option("--pred", eargs.pred_dir)->required();
  eval->add_option("--gt", eargs.gt_manifest)->required();
  eval->add_option("--out", eargs.out_csv);
  eval->add_option("--window", eargs.betti.window);
  eval->add_option("--stride", eargs.betti.stride);
  eval->add_option("--connectivity", eargs.betti.connectivity);

  // --- corrupt ----------------------------------------------------------------
  auto* corrupt = app.add_subcommand("corrupt", "Corrupt a mask with missed + false splits");
  dtu::cli::CorruptArgs cargs;
  corrupt->add_option("--mask", cargs.mask_path)->required();
  corrupt->add_option("--image", cargs.image_path)->required();
  corrupt->add_option("--lambda", cargs.lambda)->required();
  corrupt->add_option("--patch-size", cargs.patch_size);
  corrupt->add_option("--seed", cargs.seed);
  corrupt->add_option("--classes", cargs.num_classes, "0 = infer from mask");
  corrupt->add_option("--order", cargs.order, "missed-first (default) or false-first");
  corrupt->add_option("--out", cargs.out_path)->required();

  // --- fuse -------------------------------------------------------------------
  auto* fuse = app.add_subcommand("fuse", "Fuse texture and topology probability maps");
  dtu::cli::FuseArgs fargs;
  fuse->add_option("--tex", fargs.tex_path)->required();
  fuse->add_option("--top", fargs.top_path)->required();
  fuse->add_option("--omega", fargs.omega);
  fuse->add_option("--out", fargs.out_path)->required();

  // --- synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic curvilinear corpus");
  dtu::cli::SynthArgs sargs;
  synth->add_option("--out", sargs.out_dir)->required();
  synth->add_option("--num-images", sargs.spec.num_images)->required();
  synth->add_option("--size", sargs.spec.image_size);
  synth->add_option("--classes", sargs.spec.num_classes);
  synth->add_option("--volumetric", sargs.spec.num_volumetric);
  synth->add_option("--contrast", sargs.spec.contrast);
  synth->add_option("--gap-prob", sargs.spec.gap_probability);
  synth->add_option("--gap-length", sargs.spec.gap_length_frac);
  synth->add_option("--noise", sargs.spec.noise_sigma);
  synth->add_option("--seed", sargs.spec.rng_seed);
  synth->add_option("--val-fraction", sargs.val_fraction);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (!config_path.empty()) run = dtu::run_config_from_json_file(config_path);
      if (!train_manifest.empty()) run.train_manifest = train_manifest;
      if (!val_manifest.empty()) run.val_manifest = val_manifest;
      if (!out_dir.empty()) run.out_dir = out_dir;
      if (!resume_from.empty()) run.resume_from = resume_from;
      if (full_drive) {
        run.drive_root = drive_root.empty() ? env_or("DTU_DATA_ROOT", "") : drive_root;
        if (run.drive_root.empty())
          throw std::runtime_error("--full-drive needs --data-root or DTU_DATA_ROOT");
      }
      if (lr > 0) run.optimizer.lr = lr;
      if (epochs > 0) run.optimizer.epochs = epochs;
      if (batch > 0) run.optimizer.batch_size = batch;
      if (base_channels > 0) run.model.base_channels = base_channels;
      if (depth > 0) run.model.depth = depth;
      if (tau > 0) run.loss.tau = tau;
      if (omega >= 0) run.fusion.omega = omega;
      if (lambda_start >= 0) run.corruption.lambda_start = lambda_start;
      if (lambda_end >= 0) run.corruption.lambda_end = lambda_end;
      if (patch_size > 0) run.corruption.patch_size = patch_size;
      if (triplet_weight >= 0) run.loss.triplet_weight = triplet_weight;
      if (seed >= 0) run.seed = static_cast<std::uint64_t>(seed);

      const dtu::TrainResult result = dtu::train_from_config(run);
      std::cout << "best checkpoint: " << result.best_checkpoint << "\n"
                << "loss csv: " << result.loss_csv << "\n";
      if (result.best_epoch >= 0)
        std::cout << "best validation score " << result.best_val_score << " at epoch "
                  << result.best_epoch << "\n";

      if (!run.drive_root.empty()) {
        // informational comparison against the published DRIVE table
        const dtu::DriveSet drive = dtu::load_drive(run.drive_root);
        const dtu::DTUNetModel model = dtu::DTUNetModel::load(result.best_checkpoint);
        std::vector<dtu::SegmentationMask> preds, gts;
        for (const auto& s : drive.test) {
          preds.push_back(
              dtu::predict_fused(model, s.image, run.fusion, run.patches, s.mask.class_kind).mask);
          gts.push_back(s.mask);
        }
        const dtu::MetricReport report =
            dtu::evaluate(preds, gts, dtu::EvalConfig{run.betti});
        const std::string cmp = run.out_dir + "/drive_comparison.csv";
        dtu::cli::write_drive_comparison(report, cmp);
        std::cout << "DRIVE comparison written to " << cmp << "\n" << report.table();
      }
    } else if (*predict) {
      dtu::cli::cmd_predict(pargs);
    } else if (*eval) {
      dtu::cli::cmd_eval(eargs);
    } else if (*corrupt) {
      dtu::cli::cmd_corrupt(cargs);
    } else if (*fuse) {
      dtu::cli::cmd_fuse(fargs);
    } else if (*synth) {
      dtu::cli::cmd_synth(sargs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
