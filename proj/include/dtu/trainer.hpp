#pragma once

#include <string>
#include <vector>

#include "dtu/config.hpp"
#include "dtu/data.hpp"
#include "dtu/model.hpp"

namespace dtu {

struct TrainResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string loss_csv;
  double best_val_score = 0.0;  // betti_error + (1 - miou), lower is better
  int best_epoch = -1;
  LossBreakdown final_loss;
};

// Joint training of the DTU-Net per the unified loss; corrupted masks are
// regenerated online per (epoch, sample) with the scheduled lambda.
TrainResult train_dtu(const RunConfig& cfg, const std::vector<Sample>& train_set,
                      const std::vector<Sample>& val_set);

// Manifest/DRIVE-loading convenience wrapper used by the CLI.
TrainResult train_from_config(RunConfig cfg);

// Fused prediction of a full image, applying the sliding-window protocol when
// the image exceeds the test window.
struct FusedPrediction {
  ProbabilityMap p_tex;
  ProbabilityMap p_top;
  ProbabilityMap fused;
  SegmentationMask mask;
};
FusedPrediction predict_fused(const DTUNetModel& model, const InputImage& image,
                              const FusionConfig& fusion, const PatchProtocol& patches,
                              const std::vector<ClassKind>& kinds);

// Validation selection score: betti_error + (1 - miou).
double validation_score(const DTUNetModel& model, const std::vector<Sample>& val_set,
                        const RunConfig& cfg);

}  // namespace dtu
