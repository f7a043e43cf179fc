#include "dtu/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dtu {

void OptimizerConfig::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("OptimizerConfig: lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("OptimizerConfig: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("OptimizerConfig: epochs must be >= 1");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  corruption.validate();
  fusion.validate();
  betti.validate();
  patches.validate();
  optimizer.validate();
  if (out_dir.empty()) throw std::invalid_argument("RunConfig: out_dir is required");
  if (train_manifest.empty() && drive_root.empty())
    throw std::invalid_argument("RunConfig: either train_manifest or drive_root is required");
}

namespace {

using nlohmann::json;

json to_json(const RunConfig& cfg) {
  json j;
  j["model"] = {{"depth", cfg.model.depth},
                {"base_channels", cfg.model.base_channels},
                {"image_channels", cfg.model.image_channels},
                {"num_classes", cfg.model.num_classes},
                {"se_reduction", cfg.model.se_reduction},
                {"init_seed", cfg.model.init_seed}};
  j["loss"] = {{"tau", cfg.loss.tau},
               {"focal_gamma", cfg.loss.focal_gamma},
               {"focal_alpha", cfg.loss.focal_alpha},
               {"dice_weight", cfg.loss.dice_weight},
               {"focal_weight", cfg.loss.focal_weight},
               {"cldice_alpha", cfg.loss.cldice_alpha},
               {"cldice_beta", cfg.loss.cldice_beta},
               {"skeleton_iters", cfg.loss.skeleton_iters},
               {"tex_weight", cfg.loss.tex_weight},
               {"bce_weight", cfg.loss.bce_weight},
               {"triplet_weight", cfg.loss.triplet_weight}};
  j["corruption"] = {{"lambda_start", cfg.corruption.lambda_start},
                     {"lambda_end", cfg.corruption.lambda_end},
                     {"patch_size", cfg.corruption.patch_size},
                     {"missed_first", cfg.corruption.missed_first}};
  j["fusion"] = {{"omega", cfg.fusion.omega}, {"renorm_epsilon", cfg.fusion.renorm_epsilon}};
  j["betti"] = {{"window", cfg.betti.window},
                {"stride", cfg.betti.stride},
                {"connectivity", cfg.betti.connectivity}};
  j["patches"] = {{"train_crop", cfg.patches.train_crop},
                  {"test_window", cfg.patches.test_window},
                  {"test_stride", cfg.patches.test_stride}};
  j["optimizer"] = {{"lr", cfg.optimizer.lr},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"eps", cfg.optimizer.eps},
                    {"batch_size", cfg.optimizer.batch_size},
                    {"epochs", cfg.optimizer.epochs}};
  j["train_manifest"] = cfg.train_manifest;
  j["val_manifest"] = cfg.val_manifest;
  j["drive_root"] = cfg.drive_root;
  j["out_dir"] = cfg.out_dir;
  j["resume_from"] = cfg.resume_from;
  j["seed"] = cfg.seed;
  j["val_interval"] = cfg.val_interval;
  return j;
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    maybe(m, "depth", cfg.model.depth);
    maybe(m, "base_channels", cfg.model.base_channels);
    maybe(m, "image_channels", cfg.model.image_channels);
    maybe(m, "num_classes", cfg.model.num_classes);
    maybe(m, "se_reduction", cfg.model.se_reduction);
    maybe(m, "init_seed", cfg.model.init_seed);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    maybe(l, "tau", cfg.loss.tau);
    maybe(l, "focal_gamma", cfg.loss.focal_gamma);
    maybe(l, "focal_alpha", cfg.loss.focal_alpha);
    maybe(l, "dice_weight", cfg.loss.dice_weight);
    maybe(l, "focal_weight", cfg.loss.focal_weight);
    maybe(l, "cldice_alpha", cfg.loss.cldice_alpha);
    maybe(l, "cldice_beta", cfg.loss.cldice_beta);
    maybe(l, "skeleton_iters", cfg.loss.skeleton_iters);
    maybe(l, "tex_weight", cfg.loss.tex_weight);
    maybe(l, "bce_weight", cfg.loss.bce_weight);
    maybe(l, "triplet_weight", cfg.loss.triplet_weight);
  }
  if (j.contains("corruption")) {
    const auto& c = j.at("corruption");
    maybe(c, "lambda_start", cfg.corruption.lambda_start);
    maybe(c, "lambda_end", cfg.corruption.lambda_end);
    maybe(c, "patch_size", cfg.corruption.patch_size);
    maybe(c, "missed_first", cfg.corruption.missed_first);
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    maybe(f, "omega", cfg.fusion.omega);
    maybe(f, "renorm_epsilon", cfg.fusion.renorm_epsilon);
  }
  if (j.contains("betti")) {
    const auto& b = j.at("betti");
    maybe(b, "window", cfg.betti.window);
    maybe(b, "stride", cfg.betti.stride);
    maybe(b, "connectivity", cfg.betti.connectivity);
  }
  if (j.contains("patches")) {
    const auto& p = j.at("patches");
    maybe(p, "train_crop", cfg.patches.train_crop);
    maybe(p, "test_window", cfg.patches.test_window);
    maybe(p, "test_stride", cfg.patches.test_stride);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    maybe(o, "lr", cfg.optimizer.lr);
    maybe(o, "beta1", cfg.optimizer.beta1);
    maybe(o, "beta2", cfg.optimizer.beta2);
    maybe(o, "eps", cfg.optimizer.eps);
    maybe(o, "batch_size", cfg.optimizer.batch_size);
    maybe(o, "epochs", cfg.optimizer.epochs);
  }
  maybe(j, "train_manifest", cfg.train_manifest);
  maybe(j, "val_manifest", cfg.val_manifest);
  maybe(j, "drive_root", cfg.drive_root);
  maybe(j, "out_dir", cfg.out_dir);
  maybe(j, "resume_from", cfg.resume_from);
  maybe(j, "seed", cfg.seed);
  maybe(j, "val_interval", cfg.val_interval);
  return cfg;
}

}  // namespace

RunConfig run_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  json j = to_json(cfg);
  j["version"] = "0.1.0";
  out << j.dump(2) << "\n";
}

}  // namespace dtu
