#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtu/config.hpp"
#include "dtu/metrics.hpp"
#include "dtu/trainer.hpp"

namespace dtu::cli {

struct PredictArgs {
  std::string checkpoint;
  std::string images;  // manifest.json, a directory of PNGs, or one PNG
  std::string out_dir;
  double omega = 0.5;
  PatchProtocol patches;
};
void cmd_predict(const PredictArgs& args);

struct EvalArgs {
  std::string pred_dir;
  std::string gt_manifest;
  std::string out_csv;  // empty = stdout only
  BettiConfig betti;
};
MetricReport cmd_eval(const EvalArgs& args);

struct CorruptArgs {
  std::string mask_path;
  std::string image_path;
  std::string out_path;
  double lambda = 0.3;
  int patch_size = 16;
  std::uint64_t seed = 0;
  int num_classes = 0;  // 0 = infer from mask content
  std::string order = "missed-first";
};
void cmd_corrupt(const CorruptArgs& args);

struct FuseArgs {
  std::string tex_path;
  std::string top_path;
  std::string out_path;
  double omega = 0.5;
};
void cmd_fuse(const FuseArgs& args);

struct SynthArgs {
  SyntheticSpec spec;
  std::string out_dir;
  double val_fraction = 0.0;  // carve a val manifest from the tail
};
void cmd_synth(const SynthArgs& args);

// Records our DRIVE metrics next to the published table; informational only.
void write_drive_comparison(const MetricReport& ours, const std::string& path);

}  // namespace dtu::cli
