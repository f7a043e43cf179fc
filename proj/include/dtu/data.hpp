#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtu/core.hpp"
#include "dtu/rng.hpp"

namespace dtu {

struct Sample {
  InputImage image;
  SegmentationMask mask;
};

// Synthetic curvilinear corpus with analytically known topology: every
// foreground class renders exactly one connected stroke inside its own
// horizontal band. Faded segments lower image contrast without touching the
// labels, reproducing the low-visibility regime the topology net targets.
struct SyntheticSpec {
  int image_size = 64;
  int num_images = 1;
  int num_classes = 3;      // curvilinear classes
  int num_volumetric = 0;   // appended filled-blob classes
  std::vector<std::string> curve_families = {"sine", "arc", "polyline", "loop"};
  double thickness_min = 1.5;
  double thickness_max = 3.0;
  double contrast = 0.6;          // foreground-background intensity gap
  double background = 0.15;
  double gap_probability = 0.5;   // chance a curve gets a faded segment
  double gap_length_frac = 0.25;  // faded span as a fraction of the curve
  double noise_sigma = 0.03;
  std::uint64_t rng_seed = 0;

  int total_classes() const { return num_classes + num_volumetric; }
  std::vector<ClassKind> class_kinds() const;
  void validate() const;
};

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Dataset manifest (JSON): class count, per-class kinds, image/mask paths
// relative to the manifest location.
// ---------------------------------------------------------------------------

struct DatasetManifest {
  int num_classes = 1;
  int image_channels = 1;
  std::vector<ClassKind> class_kind;
  struct Item {
    std::string image;
    std::string mask;
  };
  std::vector<Item> items;
  std::string base_dir;  // set on load; joined with relative paths
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);
std::vector<Sample> load_dataset(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Patch protocol
// ---------------------------------------------------------------------------

struct PatchProtocol {
  int train_crop = 256;
  int test_window = 128;
  int test_stride = 64;

  void validate() const;
};

struct WindowRect {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;
};

// Window origins cover every pixel; the final window in each dimension is
// clamped to the border instead of padding.
std::vector<WindowRect> sliding_windows(int height, int width, int window, int stride);

Sample random_crop(const InputImage& image, const SegmentationMask& mask, int size, Rng& rng);

InputImage crop_image(const InputImage& image, const WindowRect& rect);

// Per-pixel mean of covering patches, renormalized; throws on uncovered pixels.
ProbabilityMap stitch(const std::vector<ProbabilityMap>& patches,
                      const std::vector<WindowRect>& rects, int height, int width);

// ---------------------------------------------------------------------------
// DRIVE ingestion: 20 labeled images under <root>/training, first 16 by
// sorted filename for training, last 4 for testing. Files are expected as
// PNG conversions of the published layout.
// ---------------------------------------------------------------------------

struct DriveSet {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

DriveSet load_drive(const std::string& root_dir);

}  // namespace dtu
