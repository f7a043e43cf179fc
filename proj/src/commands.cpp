#include "dtu/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "dtu/corruption.hpp"
#include "dtu/fusion.hpp"
#include "dtu/png_io.hpp"

namespace fs = std::filesystem;

namespace dtu::cli {

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

void cmd_predict(const PredictArgs& args) {
  const DTUNetModel model = DTUNetModel::load(args.checkpoint);
  FusionConfig fusion;
  fusion.omega = args.omega;

  struct Entry {
    std::string path;
    std::string stem;
  };
  std::vector<Entry> entries;
  std::vector<ClassKind> kinds(static_cast<std::size_t>(model.spec().num_classes),
                               ClassKind::kCurvilinear);

  if (fs::is_directory(args.images)) {
    for (const auto& e : fs::directory_iterator(args.images))
      if (e.path().extension() == ".png") entries.push_back({e.path().string(), e.path().stem().string()});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.path < b.path; });
  } else if (fs::path(args.images).extension() == ".json") {
    const DatasetManifest manifest = load_manifest(args.images);
    if (manifest.num_classes != model.spec().num_classes)
      throw std::runtime_error("predict: manifest class count " +
                               std::to_string(manifest.num_classes) +
                               " does not match checkpoint " +
                               std::to_string(model.spec().num_classes));
    kinds = manifest.class_kind;
    for (const auto& item : manifest.items) {
      const std::string full = (fs::path(manifest.base_dir) / item.image).string();
      entries.push_back({full, stem_of(item.image)});
    }
  } else {
    entries.push_back({args.images, stem_of(args.images)});
  }
  if (entries.empty()) throw std::runtime_error("predict: no input images found");

  fs::create_directories(args.out_dir);
  for (const auto& entry : entries) {
    const InputImage image = load_image(entry.path, model.spec().image_channels);
    const FusedPrediction pred =
        predict_fused(model, image, fusion, args.patches, kinds);
    const fs::path base = fs::path(args.out_dir) / entry.stem;
    save_probmap(pred.p_tex, base.string() + "_tex.probs");
    save_probmap(pred.p_top, base.string() + "_top.probs");
    save_probmap(pred.fused, base.string() + "_fused.probs");
    save_mask(pred.mask, base.string() + "_mask.png");
  }
}

MetricReport cmd_eval(const EvalArgs& args) {
  const DatasetManifest manifest = load_manifest(args.gt_manifest);
  std::vector<SegmentationMask> preds, gts;
  for (const auto& item : manifest.items) {
    const std::string gt_path = (fs::path(manifest.base_dir) / item.mask).string();
    gts.push_back(load_mask(gt_path, manifest.num_classes, manifest.class_kind));
    const std::string pred_path =
        (fs::path(args.pred_dir) / (stem_of(item.image) + "_mask.png")).string();
    if (!fs::exists(pred_path))
      throw std::runtime_error("eval: missing prediction " + pred_path);
    preds.push_back(load_mask(pred_path, manifest.num_classes, manifest.class_kind));
  }

  EvalConfig cfg;
  cfg.betti = args.betti;
  const MetricReport report = evaluate(preds, gts, cfg);
  std::cout << report.table();
  if (!args.out_csv.empty()) {
    std::ofstream out(args.out_csv);
    if (!out) throw std::runtime_error("eval: cannot write " + args.out_csv);
    out << report.csv_header() << "\n" << report.csv_row() << "\n";
  }
  return report;
}

void cmd_corrupt(const CorruptArgs& args) {
  int num_classes = args.num_classes;
  if (num_classes == 0) {
    const png::Image8 raw = png::read(args.mask_path);
    if (raw.channels != 1) throw std::runtime_error("corrupt: mask must be grayscale PNG");
    std::uint8_t max_label = 0;
    for (auto v : raw.data) max_label = std::max(max_label, v);
    num_classes = std::max<int>(1, max_label);
  }
  const SegmentationMask mask = load_mask(args.mask_path, num_classes);
  const InputImage image = load_image(args.image_path, 0);
  if (image.height != mask.height || image.width != mask.width)
    throw std::runtime_error("corrupt: image and mask dimensions differ");

  CorruptionConfig cfg;
  cfg.patch_size = args.patch_size;
  if (args.order == "missed-first")
    cfg.missed_first = true;
  else if (args.order == "false-first")
    cfg.missed_first = false;
  else
    throw std::runtime_error("corrupt: order must be missed-first or false-first");

  Rng rng(args.seed);
  const SegmentationMask out = corrupt(mask, image, args.lambda, cfg, rng);
  save_mask(out, args.out_path);
}

void cmd_fuse(const FuseArgs& args) {
  const ProbabilityMap tex = load_probmap(args.tex_path);
  const ProbabilityMap top = load_probmap(args.top_path);
  FusionConfig cfg;
  cfg.omega = args.omega;
  save_probmap(fuse(tex, top, cfg), args.out_path);
}

void cmd_synth(const SynthArgs& args) {
  args.spec.validate();
  Rng rng(args.spec.rng_seed);
  const std::vector<Sample> samples = generate_synthetic(args.spec, rng);

  fs::create_directories(fs::path(args.out_dir) / "images");
  fs::create_directories(fs::path(args.out_dir) / "masks");

  DatasetManifest manifest;
  manifest.num_classes = args.spec.total_classes();
  manifest.image_channels = 1;
  manifest.class_kind = args.spec.class_kinds();

  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu", i);
    const std::string image_rel = std::string("images/") + name + ".png";
    const std::string mask_rel = std::string("masks/") + name + ".png";
    save_image(samples[i].image, (fs::path(args.out_dir) / image_rel).string());
    save_mask(samples[i].mask, (fs::path(args.out_dir) / mask_rel).string());
    manifest.items.push_back({image_rel, mask_rel});
  }

  if (args.val_fraction > 0.0) {
    const std::size_t val_n = static_cast<std::size_t>(
        std::max(1.0, args.val_fraction * static_cast<double>(samples.size())));
    DatasetManifest train = manifest, val = manifest;
    train.items.assign(manifest.items.begin(), manifest.items.end() - static_cast<long>(val_n));
    val.items.assign(manifest.items.end() - static_cast<long>(val_n), manifest.items.end());
    save_manifest(train, (fs::path(args.out_dir) / "train_manifest.json").string());
    save_manifest(val, (fs::path(args.out_dir) / "val_manifest.json").string());
  }
  save_manifest(manifest, (fs::path(args.out_dir) / "manifest.json").string());
}

void write_drive_comparison(const MetricReport& ours, const std::string& path) {
  // Published DRIVE numbers for the full pipeline; desk-scale runs are not
  // expected to match them, the table is informational.
  constexpr double kPaperFrechet = 2.9316;
  constexpr double kPaperBetti = 0.8597;
  constexpr double kPaperIoU = 73.86;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write comparison: " + path);
  out << "metric,this_run,published\n";
  char row[128];
  std::snprintf(row, sizeof(row), "frechet,%.4f,%.4f\n", ours.frechet, kPaperFrechet);
  out << row;
  std::snprintf(row, sizeof(row), "betti_error,%.4f,%.4f\n", ours.betti_error, kPaperBetti);
  out << row;
  std::snprintf(row, sizeof(row), "iou,%.2f,%.2f\n", ours.iou * 100.0, kPaperIoU);
  out << row;
}

}  // namespace dtu::cli
