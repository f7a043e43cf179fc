#include "dtu/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dtu/checkpoint.hpp"
#include "dtu/corruption.hpp"
#include "dtu/fusion.hpp"
#include "dtu/metrics.hpp"
#include "dtu/nn/adam.hpp"

namespace fs = std::filesystem;

namespace dtu {

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ULL;   // per-epoch order
constexpr std::uint64_t kCorruptTag = 0x636f7272ULL;   // per-sample corruption
constexpr std::uint64_t kCropTag = 0x63726f70ULL;      // per-sample crop

struct Batch {
  nn::Tensor<float> images;
  nn::Tensor<float> one_hot_gt;
  nn::Tensor<float> one_hot_corrupted;
  nn::Tensor<std::int32_t> labels;
  nn::Tensor<float> binarized;
};

// Stack samples + their corrupted masks into padded NCHW tensors.
Batch build_batch(const std::vector<const Sample*>& samples,
                  const std::vector<const SegmentationMask*>& corrupted, int num_classes,
                  int stride) {
  const int h = samples[0]->image.height, w = samples[0]->image.width;
  const int channels = samples[0]->image.channels;
  for (const Sample* s : samples)
    if (s->image.height != h || s->image.width != w || s->image.channels != channels)
      throw std::invalid_argument(
          "train: all samples in a batch must share dimensions (set train_crop)");

  const int n = static_cast<int>(samples.size());
  const int hp = (h + stride - 1) / stride * stride;
  const int wp = (w + stride - 1) / stride * stride;
  Batch b{nn::Tensor<float>({n, channels, hp, wp}),
          nn::Tensor<float>({n, num_classes + 1, hp, wp}),
          nn::Tensor<float>({n, num_classes + 1, hp, wp}),
          nn::Tensor<std::int32_t>({n, 1, hp, wp}),
          nn::Tensor<float>({n, 1, hp, wp})};

  auto reflect = [](int i, int dim) { return i < dim ? i : 2 * dim - 2 - i; };
  for (int i = 0; i < n; ++i) {
    const Sample& s = *samples[i];
    const SegmentationMask& ghat = *corrupted[static_cast<std::size_t>(i)];
    for (int y = 0; y < hp; ++y) {
      const int sy = reflect(y, h);
      for (int x = 0; x < wp; ++x) {
        const int sx = reflect(x, w);
        for (int c = 0; c < channels; ++c)
          b.images(i, c, y, x) = static_cast<float>(s.image.at(c, sy, sx));
        const int g = s.mask.at(sy, sx);
        const int gh = ghat.at(sy, sx);
        b.one_hot_gt(i, g, y, x) = 1.0f;
        b.one_hot_corrupted(i, gh, y, x) = 1.0f;
        b.labels(i, 0, y, x) = g;
        b.binarized(i, 0, y, x) = g > 0 ? 1.0f : 0.0f;
      }
    }
  }
  return b;
}

}  // namespace

FusedPrediction predict_fused(const DTUNetModel& model, const InputImage& image,
                              const FusionConfig& fusion, const PatchProtocol& patches,
                              const std::vector<ClassKind>& kinds) {
  FusedPrediction out;
  if (image.height > patches.test_window || image.width > patches.test_window) {
    const auto rects =
        sliding_windows(image.height, image.width, patches.test_window, patches.test_stride);
    std::vector<ProbabilityMap> tex_patches, top_patches;
    tex_patches.reserve(rects.size());
    top_patches.reserve(rects.size());
    for (const WindowRect& r : rects) {
      const auto pred = model.predict(crop_image(image, r));
      tex_patches.push_back(pred.p_tex);
      top_patches.push_back(pred.p_top);
    }
    out.p_tex = stitch(tex_patches, rects, image.height, image.width);
    out.p_top = stitch(top_patches, rects, image.height, image.width);
  } else {
    const auto pred = model.predict(image);
    out.p_tex = pred.p_tex;
    out.p_top = pred.p_top;
  }
  out.fused = fuse(out.p_tex, out.p_top, fusion);
  out.mask = argmax_mask(out.fused, kinds);
  return out;
}

double validation_score(const DTUNetModel& model, const std::vector<Sample>& val_set,
                        const RunConfig& cfg) {
  if (val_set.empty()) throw std::invalid_argument("validation_score: empty validation set");
  std::vector<SegmentationMask> preds, gts;
  for (const Sample& s : val_set) {
    preds.push_back(
        predict_fused(model, s.image, cfg.fusion, cfg.patches, s.mask.class_kind).mask);
    gts.push_back(s.mask);
  }
  const MetricReport report = evaluate(preds, gts, EvalConfig{cfg.betti});
  return report.betti_error + (1.0 - report.miou);
}

TrainResult train_dtu(const RunConfig& cfg, const std::vector<Sample>& train_set,
                      const std::vector<Sample>& val_set) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");

  fs::create_directories(cfg.out_dir);
  const std::string csv_path = (fs::path(cfg.out_dir) / "loss.csv").string();
  const std::string best_path = (fs::path(cfg.out_dir) / "model_best.dtu").string();
  const std::string last_path = (fs::path(cfg.out_dir) / "model_last.dtu").string();
  save_run_config(cfg, (fs::path(cfg.out_dir) / "run_manifest.json").string());

  DTUNetModel model(cfg.model);
  nn::Adam<float> adam(model.net().parameters(), cfg.optimizer.lr, cfg.optimizer.beta1,
                       cfg.optimizer.beta2, cfg.optimizer.eps);
  int start_epoch = 0;
  if (!cfg.resume_from.empty()) {
    const Checkpoint ckpt = load_checkpoint(cfg.resume_from);
    model = DTUNetModel::load(cfg.resume_from);
    adam = nn::Adam<float>(model.net().parameters(), cfg.optimizer.lr, cfg.optimizer.beta1,
                           cfg.optimizer.beta2, cfg.optimizer.eps);
    auto& m1 = adam.moment1();
    auto& m2 = adam.moment2();
    auto& params = adam.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto mit = ckpt.arrays.find("adam.m." + params[i].name);
      const auto vit = ckpt.arrays.find("adam.v." + params[i].name);
      if (mit != ckpt.arrays.end()) m1[i] = mit->second;
      if (vit != ckpt.arrays.end()) m2[i] = vit->second;
    }
    adam.set_step_count(ckpt.adam_step);
    start_epoch = ckpt.epoch + 1;
  }

  std::ofstream csv(csv_path, start_epoch > 0 ? std::ios::app : std::ios::out);
  if (!csv) throw std::runtime_error("cannot open loss CSV: " + csv_path);
  if (start_epoch == 0) csv << "step,L_tex,L_BCE,L_tri,total\n";

  auto save_with_optimizer = [&](const std::string& path, int epoch, double lambda) {
    Checkpoint ckpt;
    ckpt.spec = cfg.model;
    ckpt.epoch = epoch;
    ckpt.lambda = lambda;
    ckpt.adam_step = adam.step_count();
    for (const auto& p : model.net().parameters()) {
      ckpt.arrays.emplace(p.name, p.var->value);
    }
    auto& m1 = adam.moment1();
    auto& m2 = adam.moment2();
    auto& params = adam.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.arrays.emplace("adam.m." + params[i].name, m1[i]);
      ckpt.arrays.emplace("adam.v." + params[i].name, m2[i]);
    }
    save_checkpoint(ckpt, path);
  };

  TrainResult result;
  result.loss_csv = csv_path;
  result.best_checkpoint = best_path;
  result.last_checkpoint = last_path;
  double best_score = std::numeric_limits<double>::infinity();

  long long step = static_cast<long long>(start_epoch) *
                   ((train_set.size() + cfg.optimizer.batch_size - 1) / cfg.optimizer.batch_size);
  const bool crop_needed = [&] {
    for (const Sample& s : train_set)
      if (s.image.height > cfg.patches.train_crop || s.image.width > cfg.patches.train_crop)
        return true;
    return false;
  }();

  for (int epoch = start_epoch; epoch < cfg.optimizer.epochs; ++epoch) {
    const double lambda = lambda_at(epoch, cfg.optimizer.epochs, cfg.corruption);

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(mix_seed(cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.optimizer.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.optimizer.batch_size));

      std::vector<Sample> cropped;  // storage when the crop protocol applies
      std::vector<const Sample*> samples;
      std::vector<SegmentationMask> corrupted;
      cropped.reserve(end - begin);
      corrupted.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const int idx = order[i];
        const std::uint64_t sample_key =
            static_cast<std::uint64_t>(epoch) * 1000003ULL + static_cast<std::uint64_t>(idx);
        const Sample* s = &train_set[static_cast<std::size_t>(idx)];
        if (crop_needed) {
          Rng crop_rng(mix_seed(cfg.seed, kCropTag, sample_key));
          cropped.push_back(random_crop(s->image, s->mask, cfg.patches.train_crop, crop_rng));
          s = &cropped.back();
        }
        samples.push_back(s);
        Rng corrupt_rng(mix_seed(cfg.seed, kCorruptTag, sample_key));
        if (s->mask.foreground_count() == 0)
          corrupted.push_back(s->mask);  // nothing to corrupt
        else
          corrupted.push_back(corrupt(s->mask, s->image, lambda, cfg.corruption, corrupt_rng));
      }
      std::vector<const SegmentationMask*> corrupted_ptrs;
      for (const auto& c : corrupted) corrupted_ptrs.push_back(&c);

      const Batch batch =
          build_batch(samples, corrupted_ptrs, cfg.model.num_classes, cfg.model.stride());

      auto images = nn::make_var(batch.images);
      auto gt = nn::make_var(batch.one_hot_gt);
      auto ghat = nn::make_var(batch.one_hot_corrupted);
      const auto fwd = model.net().forward(images, gt, ghat, true);
      const auto loss = unified_loss_graph(fwd.p_tex, fwd.p_top, fwd.anchor, fwd.pos, fwd.neg,
                                           batch.labels, batch.one_hot_gt, batch.binarized,
                                           cfg.loss);

      const double total = static_cast<double>(loss.total->value.scalar());
      if (!std::isfinite(total)) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                 " (epoch " + std::to_string(epoch) + ")");
      }

      adam.zero_grad();
      nn::backward(loss.total);
      adam.step();

      char row[160];
      std::snprintf(row, sizeof(row), "%lld,%.9g,%.9g,%.9g,%.9g\n", step,
                    static_cast<double>(loss.l_tex->value.scalar()),
                    static_cast<double>(loss.l_bce->value.scalar()),
                    static_cast<double>(loss.l_tri->value.scalar()),
                    static_cast<double>(loss.total->value.scalar()));
      csv << row;
      result.final_loss = {static_cast<double>(loss.l_tex->value.scalar()),
                           static_cast<double>(loss.l_bce->value.scalar()),
                           static_cast<double>(loss.l_tri->value.scalar()), total};
      ++step;
    }

    const bool last_epoch = epoch + 1 == cfg.optimizer.epochs;
    if (!val_set.empty() && (epoch % cfg.val_interval == 0 || last_epoch)) {
      const double score = validation_score(model, val_set, cfg);
      if (score < best_score) {
        best_score = score;
        result.best_val_score = score;
        result.best_epoch = epoch;
        save_with_optimizer(best_path, epoch, lambda);
      }
    }
    if (last_epoch) save_with_optimizer(last_path, epoch, lambda);
  }

  csv.flush();
  if (val_set.empty()) {
    // no validation: best = last
    result.best_epoch = cfg.optimizer.epochs - 1;
    fs::copy_file(last_path, best_path, fs::copy_options::overwrite_existing);
  }
  return result;
}

TrainResult train_from_config(RunConfig cfg) {
  std::vector<Sample> train_set, val_set;
  if (!cfg.drive_root.empty()) {
    const DriveSet drive = load_drive(cfg.drive_root);
    train_set = drive.train;
    val_set = drive.test;
    cfg.model.num_classes = 1;
    cfg.model.image_channels = 1;
  } else {
    const DatasetManifest manifest = load_manifest(cfg.train_manifest);
    train_set = load_dataset(manifest);
    cfg.model.num_classes = manifest.num_classes;
    cfg.model.image_channels = manifest.image_channels;
    if (!cfg.val_manifest.empty()) val_set = load_dataset(load_manifest(cfg.val_manifest));
  }
  return train_dtu(cfg, train_set, val_set);
}

}  // namespace dtu
