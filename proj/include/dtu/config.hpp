#pragma once

#include <cstdint>
#include <string>

#include "dtu/corruption.hpp"
#include "dtu/data.hpp"
#include "dtu/fusion.hpp"
#include "dtu/losses.hpp"
#include "dtu/metrics.hpp"
#include "dtu/model.hpp"

namespace dtu {

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int epochs = 100;

  void validate() const;
};

// Everything one training / evaluation run needs; serialized verbatim into
// the run manifest so results are reproducible from the output directory.
struct RunConfig {
  ModelSpec model;
  LossConfig loss;
  CorruptionConfig corruption;
  FusionConfig fusion;
  BettiConfig betti;
  PatchProtocol patches;
  OptimizerConfig optimizer;

  std::string train_manifest;
  std::string val_manifest;
  std::string drive_root;  // when set, train on DRIVE instead of manifests
  std::string out_dir;
  std::string resume_from;
  std::uint64_t seed = 1;
  int val_interval = 1;

  void validate() const;
};

RunConfig run_config_from_json_file(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace dtu
