#pragma once

#include <cstdint>

#include "dtu/core.hpp"
#include "dtu/rng.hpp"

namespace dtu {

struct CorruptionConfig {
  double lambda_start = 0.5;
  double lambda_end = 0.1;
  int patch_size = 16;
  std::uint64_t rng_seed = 0;
  // Missed splits are applied before false splits by default; the reverse
  // order is available since the source text does not pin it down.
  bool missed_first = true;

  void validate(int image_height = 0, int image_width = 0) const;
};

// Blank a random ceil(lam * n) subset of the foreground-containing
// patch_size x patch_size tiles (top-left anchored, edge tiles smaller).
SegmentationMask false_splits(const SegmentationMask& mask, double lam, int patch_size,
                              Rng& rng);

// Relabel a random ceil(lam * |candidates|) subset of background pixels whose
// intensity lies within [m-d, m+d] (m, d = mean/std of foreground intensity).
// Each selected pixel takes the class of the most similar foreground pixel:
// closest intensity, ties by squared spatial distance, then row-major order.
SegmentationMask missed_splits(const SegmentationMask& mask, const InputImage& image,
                               double lam, Rng& rng);

// Sequential composition of both corruptions with a shared lambda.
SegmentationMask corrupt(const SegmentationMask& mask, const InputImage& image, double lam,
                         const CorruptionConfig& cfg, Rng& rng);

// Linear schedule from lambda_start (epoch 0) to lambda_end (last epoch).
double lambda_at(int epoch, int total_epochs, const CorruptionConfig& cfg);

}  // namespace dtu
