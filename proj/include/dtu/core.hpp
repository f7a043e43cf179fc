#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dtu {

enum class ClassKind { kCurvilinear, kVolumetric };

std::string to_string(ClassKind k);
ClassKind class_kind_from_string(const std::string& s);

// Grayscale or RGB image, intensities normalized to [0, 1].
// Planar channel-major storage: pixels[c * h * w + y * w + x].
struct InputImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;

  static InputImage zeros(int height, int width, int channels = 1);

  double& at(int c, int y, int x) {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  double at(int c, int y, int x) const {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  // Channel-mean intensity, the scalar "pixel value" used by corruption.
  double intensity(int y, int x) const;

  void validate() const;  // finite, in [0,1], dims >= 16
};

// Integer class labels, 0 = background, 1..num_classes = foreground.
struct SegmentationMask {
  int height = 0;
  int width = 0;
  int num_classes = 1;
  std::vector<std::uint8_t> labels;           // row-major
  std::vector<ClassKind> class_kind;          // one entry per foreground class

  static SegmentationMask zeros(int height, int width, int num_classes,
                                std::vector<ClassKind> kinds = {});

  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y * width + x)];
  }
  void set(int y, int x, std::uint8_t v) {
    labels[static_cast<std::size_t>(y * width + x)] = v;
  }
  std::size_t foreground_count() const;

  void validate() const;
};

// Per-pixel class distribution over c+1 channels (0 = background), planar.
// The 1-channel specialization stores a bare foreground probability (p_top)
// and is exempt from the sum-to-one invariant.
struct ProbabilityMap {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> probs;

  static ProbabilityMap zeros(int height, int width, int channels);

  double& at(int c, int y, int x) {
    return probs[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  double at(int c, int y, int x) const {
    return probs[static_cast<std::size_t>((c * height + y) * width + x)];
  }

  void validate(double tolerance = 1e-5) const;
};

// Spatial feature grid at the topology-net bottleneck, planar channel-major.
struct FeatureEmbedding {
  int height = 0;
  int width = 0;
  int channels = 0;
  int stride = 1;  // downsampling factor relative to the network input
  std::vector<double> features;

  double at(int c, int y, int x) const {
    return features[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  void validate() const;
};

SegmentationMask binarize_mask(const SegmentationMask& mask);
ProbabilityMap one_hot(const SegmentationMask& mask);
SegmentationMask argmax_mask(const ProbabilityMap& probs,
                             std::vector<ClassKind> kinds = {});

// Mask file format: 8-bit grayscale PNG, pixel value = class index.
SegmentationMask load_mask(const std::string& path, int num_classes,
                           std::vector<ClassKind> kinds = {});
void save_mask(const SegmentationMask& mask, const std::string& path);

// Probability file format: <name> holds raw little-endian float32, planar
// channel-major; <name>.hdr holds "height width channels\n" in ASCII.
ProbabilityMap load_probmap(const std::string& path);
void save_probmap(const ProbabilityMap& map, const std::string& path);

// Images are 8-bit gray or RGB PNG, normalized to [0,1] on load.
// channels = 0 keeps the file's channel count; 1/3 convert.
InputImage load_image(const std::string& path, int channels = 0);
void save_image(const InputImage& image, const std::string& path);

InputImage to_grayscale(const InputImage& image);
InputImage to_rgb(const InputImage& image);

}  // namespace dtu
