#include "dtu/core.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dtu/png_io.hpp"

namespace dtu {

std::string to_string(ClassKind k) {
  return k == ClassKind::kCurvilinear ? "curvilinear" : "volumetric";
}

ClassKind class_kind_from_string(const std::string& s) {
  if (s == "curvilinear") return ClassKind::kCurvilinear;
  if (s == "volumetric") return ClassKind::kVolumetric;
  throw std::invalid_argument("unknown class kind: " + s);
}

InputImage InputImage::zeros(int height, int width, int channels) {
  InputImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  return img;
}

double InputImage::intensity(int y, int x) const {
  double s = 0.0;
  for (int c = 0; c < channels; ++c) s += at(c, y, x);
  return s / channels;
}

void InputImage::validate() const {
  if (height < 16 || width < 16)
    throw std::invalid_argument("InputImage: height and width must be >= 16");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("InputImage: channels must be 1 or 3");
  if (pixels.size() != static_cast<std::size_t>(height) * width * channels)
    throw std::invalid_argument("InputImage: pixel buffer size mismatch");
  for (double v : pixels) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("InputImage: intensities must be finite and in [0,1]");
  }
}

SegmentationMask SegmentationMask::zeros(int height, int width, int num_classes,
                                         std::vector<ClassKind> kinds) {
  SegmentationMask m;
  m.height = height;
  m.width = width;
  m.num_classes = num_classes;
  m.labels.assign(static_cast<std::size_t>(height) * width, 0);
  if (kinds.empty()) kinds.assign(static_cast<std::size_t>(num_classes), ClassKind::kCurvilinear);
  m.class_kind = std::move(kinds);
  return m;
}

std::size_t SegmentationMask::foreground_count() const {
  std::size_t n = 0;
  for (auto v : labels) n += v > 0;
  return n;
}

void SegmentationMask::validate() const {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("SegmentationMask: empty dimensions");
  if (num_classes < 1 || num_classes > 255)
    throw std::invalid_argument("SegmentationMask: num_classes out of range");
  if (labels.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("SegmentationMask: label buffer size mismatch");
  if (class_kind.size() != static_cast<std::size_t>(num_classes))
    throw std::invalid_argument("SegmentationMask: class_kind must have num_classes entries");
  for (auto v : labels) {
    if (v > num_classes)
      throw std::invalid_argument("SegmentationMask: label value exceeds num_classes");
  }
}

ProbabilityMap ProbabilityMap::zeros(int height, int width, int channels) {
  ProbabilityMap p;
  p.height = height;
  p.width = width;
  p.channels = channels;
  p.probs.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  return p;
}

void ProbabilityMap::validate(double tolerance) const {
  if (height <= 0 || width <= 0 || channels < 1)
    throw std::invalid_argument("ProbabilityMap: bad dimensions");
  if (probs.size() != static_cast<std::size_t>(height) * width * channels)
    throw std::invalid_argument("ProbabilityMap: buffer size mismatch");
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double v = probs[static_cast<std::size_t>(c) * plane + i];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0 + tolerance)
        throw std::invalid_argument("ProbabilityMap: entries must be finite and in [0,1]");
      sum += v;
    }
    if (channels >= 2 && std::abs(sum - 1.0) > tolerance)
      throw std::invalid_argument("ProbabilityMap: per-pixel sum deviates from 1");
  }
}

void FeatureEmbedding::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0 || stride < 1)
    throw std::invalid_argument("FeatureEmbedding: bad dimensions");
  if (features.size() != static_cast<std::size_t>(height) * width * channels)
    throw std::invalid_argument("FeatureEmbedding: buffer size mismatch");
  for (double v : features)
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureEmbedding: non-finite value");
}

SegmentationMask binarize_mask(const SegmentationMask& mask) {
  mask.validate();
  SegmentationMask out = SegmentationMask::zeros(mask.height, mask.width, 1,
                                                 {ClassKind::kCurvilinear});
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    out.labels[i] = mask.labels[i] > 0 ? 1 : 0;
  return out;
}

ProbabilityMap one_hot(const SegmentationMask& mask) {
  mask.validate();
  const int channels = mask.num_classes + 1;
  ProbabilityMap out = ProbabilityMap::zeros(mask.height, mask.width, channels);
  const std::size_t plane = static_cast<std::size_t>(mask.height) * mask.width;
  for (std::size_t i = 0; i < plane; ++i)
    out.probs[static_cast<std::size_t>(mask.labels[i]) * plane + i] = 1.0;
  return out;
}

SegmentationMask argmax_mask(const ProbabilityMap& probs, std::vector<ClassKind> kinds) {
  if (probs.channels < 2)
    throw std::invalid_argument("argmax_mask: needs a multi-channel ProbabilityMap");
  SegmentationMask out = SegmentationMask::zeros(probs.height, probs.width,
                                                 probs.channels - 1, std::move(kinds));
  const std::size_t plane = static_cast<std::size_t>(probs.height) * probs.width;
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    double best_p = probs.probs[i];
    for (int c = 1; c < probs.channels; ++c) {
      const double v = probs.probs[static_cast<std::size_t>(c) * plane + i];
      if (v > best_p) {
        best_p = v;
        best = c;
      }
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

SegmentationMask load_mask(const std::string& path, int num_classes,
                           std::vector<ClassKind> kinds) {
  const png::Image8 img = png::read(path);
  if (img.channels != 1)
    throw std::runtime_error("mask PNG must be single-channel grayscale: " + path);
  SegmentationMask mask = SegmentationMask::zeros(img.height, img.width, num_classes,
                                                  std::move(kinds));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    if (img.data[i] > num_classes) {
      std::ostringstream oss;
      oss << "class-range error in " << path << ": pixel value "
          << static_cast<int>(img.data[i]) << " exceeds declared class count " << num_classes;
      throw std::runtime_error(oss.str());
    }
    mask.labels[i] = img.data[i];
  }
  return mask;
}

void save_mask(const SegmentationMask& mask, const std::string& path) {
  mask.validate();
  png::Image8 img;
  img.height = mask.height;
  img.width = mask.width;
  img.channels = 1;
  img.data.assign(mask.labels.begin(), mask.labels.end());
  png::write(img, path);
}

ProbabilityMap load_probmap(const std::string& path) {
  std::ifstream hdr(path + ".hdr");
  if (!hdr) throw std::runtime_error("cannot open probmap header: " + path + ".hdr");
  int h = 0, w = 0, c = 0;
  hdr >> h >> w >> c;
  if (!hdr || h <= 0 || w <= 0 || c <= 0)
    throw std::runtime_error("malformed probmap header: " + path + ".hdr");

  std::ifstream payload(path, std::ios::binary);
  if (!payload) throw std::runtime_error("cannot open probmap payload: " + path);
  payload.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(payload.tellg());
  payload.seekg(0, std::ios::beg);
  const std::size_t expected = static_cast<std::size_t>(h) * w * c * sizeof(float);
  if (bytes != expected) {
    std::ostringstream oss;
    oss << "probmap size mismatch for " << path << ": header implies " << expected
        << " bytes, payload has " << bytes;
    throw std::runtime_error(oss.str());
  }
  std::vector<float> raw(static_cast<std::size_t>(h) * w * c);
  payload.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!payload) throw std::runtime_error("short read on probmap payload: " + path);

  ProbabilityMap out = ProbabilityMap::zeros(h, w, c);
  for (std::size_t i = 0; i < raw.size(); ++i) out.probs[i] = static_cast<double>(raw[i]);
  return out;
}

void save_probmap(const ProbabilityMap& map, const std::string& path) {
  if (map.probs.size() != static_cast<std::size_t>(map.height) * map.width * map.channels)
    throw std::invalid_argument("save_probmap: buffer size mismatch");
  std::vector<float> raw(map.probs.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(map.probs[i]);

  std::ofstream payload(path, std::ios::binary);
  if (!payload) throw std::runtime_error("cannot open probmap for writing: " + path);
  payload.write(reinterpret_cast<const char*>(raw.data()),
                static_cast<std::streamsize>(raw.size() * sizeof(float)));
  payload.close();

  std::ofstream hdr(path + ".hdr");
  if (!hdr) throw std::runtime_error("cannot open probmap header for writing: " + path + ".hdr");
  hdr << map.height << " " << map.width << " " << map.channels << "\n";
}

InputImage load_image(const std::string& path, int channels) {
  const png::Image8 img = png::read(path);
  InputImage out = InputImage::zeros(img.height, img.width, img.channels);
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < img.channels; ++c)
      out.pixels[static_cast<std::size_t>(c) * plane + i] =
          img.data[i * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)] / 255.0;
  if (channels == 1 && out.channels == 3) return to_grayscale(out);
  if (channels == 3 && out.channels == 1) return to_rgb(out);
  return out;
}

void save_image(const InputImage& image, const std::string& path) {
  png::Image8 img;
  img.height = image.height;
  img.width = image.width;
  img.channels = image.channels;
  img.data.resize(static_cast<std::size_t>(image.height) * image.width * image.channels);
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < image.channels; ++c) {
      double v = image.pixels[static_cast<std::size_t>(c) * plane + i];
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      img.data[i * static_cast<std::size_t>(image.channels) + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
  png::write(img, path);
}

InputImage to_grayscale(const InputImage& image) {
  if (image.channels == 1) return image;
  InputImage out = InputImage::zeros(image.height, image.width, 1);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      out.at(0, y, x) =
          0.299 * image.at(0, y, x) + 0.587 * image.at(1, y, x) + 0.114 * image.at(2, y, x);
  return out;
}

InputImage to_rgb(const InputImage& image) {
  if (image.channels == 3) return image;
  InputImage out = InputImage::zeros(image.height, image.width, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(0, y, x);
  return out;
}

}  // namespace dtu
