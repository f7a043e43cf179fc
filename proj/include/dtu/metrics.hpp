#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtu/core.hpp"

namespace dtu {

struct BettiConfig {
  int window = 64;
  int stride = 32;
  int connectivity = 8;  // 4 or 8

  void validate() const;
};

// Ordered pixel chain; consecutive points are 8-neighbors.
struct Curve {
  std::vector<std::pair<int, int>> points;  // (row, col)
};

struct ComponentLabeling {
  int count = 0;
  std::vector<std::int32_t> labels;  // 0 = background, 1..count = components
};

struct MetricReport {
  double frechet = 0.0;
  double frechet_coverage = 1.0;  // fraction of class pixels inside the used component
  double betti_error = 0.0;
  double iou = 1.0;
  double miou = 1.0;
  double c_iou = 1.0;
  double cm_iou = 1.0;
  double v_iou = 1.0;
  double vm_iou = 1.0;
  int betti_window = 64;
  int betti_stride = 32;

  std::string csv_header() const;
  std::string csv_row() const;
  std::string table() const;
};

struct IoUFamily {
  double iou = 1.0;
  double miou = 1.0;
  double c_iou = 1.0;
  double cm_iou = 1.0;
  double v_iou = 1.0;
  double vm_iou = 1.0;
};

// Union-find component labeling of mask's foreground (any label > 0).
ComponentLabeling connected_components(const SegmentationMask& mask, int connectivity = 8);

// Mean over sliding windows of |beta0(pred) - beta0(gt)|; masks binarized
// first, border windows clamped inward.
double betti_error(const SegmentationMask& pred, const SegmentationMask& gt,
                   const BettiConfig& cfg);

// Skeletonize the class's largest component (Zhang-Suen thinning) and return
// the longest endpoint-to-endpoint path found by double BFS.
// Throws if the class has no pixels.
Curve extract_curve(const SegmentationMask& mask, int class_id);

// Discrete Frechet distance between point chains, Euclidean ground metric.
double frechet_distance(const Curve& a, const Curve& b);

IoUFamily iou_family(const SegmentationMask& pred, const SegmentationMask& gt);

struct EvalConfig {
  BettiConfig betti;
};

MetricReport evaluate(const std::vector<SegmentationMask>& preds,
                      const std::vector<SegmentationMask>& gts, const EvalConfig& cfg);

}  // namespace dtu
