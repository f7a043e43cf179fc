#include "dtu/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dtu/math_portable.hpp"
#include "dtu/png_io.hpp"

namespace fs = std::filesystem;

namespace dtu {

std::vector<ClassKind> SyntheticSpec::class_kinds() const {
  std::vector<ClassKind> kinds;
  for (int i = 0; i < num_classes; ++i) kinds.push_back(ClassKind::kCurvilinear);
  for (int i = 0; i < num_volumetric; ++i) kinds.push_back(ClassKind::kVolumetric);
  return kinds;
}

void SyntheticSpec::validate() const {
  if (image_size < 16) throw std::invalid_argument("SyntheticSpec: image_size must be >= 16");
  if (num_images < 1) throw std::invalid_argument("SyntheticSpec: num_images must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("SyntheticSpec: need at least one class");
  if (total_classes() > 255) throw std::invalid_argument("SyntheticSpec: too many classes");
  if (contrast <= 0.0 || contrast > 1.0)
    throw std::invalid_argument("SyntheticSpec: contrast must be in (0,1]");
  if (background < 0.0 || background + contrast > 1.0)
    throw std::invalid_argument("SyntheticSpec: background + contrast must stay within [0,1]");
  if (thickness_min < 1.0 || thickness_max < thickness_min)
    throw std::invalid_argument("SyntheticSpec: bad thickness range");
  if (gap_probability < 0.0 || gap_probability > 1.0 || gap_length_frac <= 0.0 ||
      gap_length_frac >= 1.0)
    throw std::invalid_argument("SyntheticSpec: bad gap parameters");
  if (noise_sigma < 0.0) throw std::invalid_argument("SyntheticSpec: noise_sigma must be >= 0");
  if (curve_families.empty())
    throw std::invalid_argument("SyntheticSpec: curve_families must not be empty");
  for (const auto& f : curve_families)
    if (f != "sine" && f != "arc" && f != "polyline" && f != "loop")
      throw std::invalid_argument("SyntheticSpec: unknown curve family " + f);
}

namespace {

constexpr double kTwoPi = 6.28318530717958647693;

struct PolyPoint {
  double y, x;
  double t;  // arc-length style parameter in [0,1]
};

// Sample one stroke as a dense polyline inside the vertical band [y_lo, y_hi].
std::vector<PolyPoint> sample_stroke(const std::string& family, double y_lo, double y_hi,
                                     int width, Rng& rng) {
  const double span = y_hi - y_lo;
  const double yc = 0.5 * (y_lo + y_hi);
  const double x0 = 2.0, x1 = static_cast<double>(width) - 3.0;
  std::vector<PolyPoint> pts;

  if (family == "sine") {
    const double amplitude = rng.uniform_range(0.25 * span, 0.5 * span);
    const double cycles = rng.uniform_range(0.8, 2.2);
    const double phase = rng.uniform_range(0.0, kTwoPi);
    const int steps = 4 * width;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const double x = x0 + (x1 - x0) * t;
      const double y = yc + amplitude * psin(kTwoPi * cycles * t + phase);
      pts.push_back({y, x, t});
    }
  } else if (family == "arc") {
    // shallow arc as a quadratic Bezier bulging inside the band
    const double ya = rng.uniform_range(y_lo, y_hi);
    const double yb = rng.uniform_range(y_lo, y_hi);
    const double bulge = rng.uniform_range(-span, span);
    double ym = 0.5 * (ya + yb) + bulge;
    ym = std::min(std::max(ym, y_lo), y_hi);
    const int steps = 4 * width;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const double x = x0 + (x1 - x0) * t;
      const double u = 1.0 - t;
      const double y = u * u * ya + 2.0 * u * t * ym + t * t * yb;
      pts.push_back({y, x, t});
    }
  } else if (family == "polyline") {
    const int knots = 4 + rng.uniform_int(3);
    std::vector<double> xs, ys;
    for (int i = 0; i < knots; ++i) {
      xs.push_back(x0 + (x1 - x0) * (static_cast<double>(i) / (knots - 1)));
      ys.push_back(rng.uniform_range(y_lo, y_hi));
    }
    const int steps_per_seg = 3 * width / (knots - 1);
    for (int s = 0; s + 1 < knots; ++s) {
      for (int i = 0; i <= steps_per_seg; ++i) {
        const double u = static_cast<double>(i) / steps_per_seg;
        const double t = (s + u) / (knots - 1);
        pts.push_back({ys[static_cast<std::size_t>(s)] * (1.0 - u) + ys[static_cast<std::size_t>(s + 1)] * u,
                       xs[static_cast<std::size_t>(s)] * (1.0 - u) + xs[static_cast<std::size_t>(s + 1)] * u, t});
      }
    }
  } else {  // loop
    const double ry = rng.uniform_range(std::min(3.0, 0.5 * span - 1.0), 0.5 * span - 1.0);
    const double max_rx = 0.45 * (x1 - x0);
    const double rx = rng.uniform_range(ry, std::max(ry, std::min(max_rx, 3.0 * ry)));
    const double cx = rng.uniform_range(x0 + rx + 1.0, x1 - rx - 1.0);
    const int steps = 6 * width;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      pts.push_back({yc + ry * psin(kTwoPi * t), cx + rx * pcos(kTwoPi * t), t});
    }
  }
  return pts;
}

// Distance-to-stroke rasterization: per pixel keep the min distance and the
// parameter of the closest polyline sample.
void rasterize_stroke(const std::vector<PolyPoint>& pts, double radius, int size,
                      std::vector<double>& dist, std::vector<double>& param) {
  const double reach = radius + 1.5;
  for (const PolyPoint& p : pts) {
    const int ylo = std::max(0, static_cast<int>(std::floor(p.y - reach)));
    const int yhi = std::min(size - 1, static_cast<int>(std::ceil(p.y + reach)));
    const int xlo = std::max(0, static_cast<int>(std::floor(p.x - reach)));
    const int xhi = std::min(size - 1, static_cast<int>(std::ceil(p.x + reach)));
    for (int y = ylo; y <= yhi; ++y) {
      for (int x = xlo; x <= xhi; ++x) {
        const double dy = y - p.y, dx = x - p.x;
        const double d = std::sqrt(dy * dy + dx * dx);
        const std::size_t idx = static_cast<std::size_t>(y * size + x);
        if (d < dist[idx]) {
          dist[idx] = d;
          param[idx] = p.t;
        }
      }
    }
  }
}

}  // namespace

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  const int size = spec.image_size;
  const int classes = spec.total_classes();
  const double band_height = static_cast<double>(size) / classes;
  if (band_height < 2.0 * spec.thickness_max + 6.0)
    throw std::invalid_argument("generate_synthetic: too many classes for the image size");

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.num_images));
  const std::vector<ClassKind> kinds = spec.class_kinds();

  for (int img_idx = 0; img_idx < spec.num_images; ++img_idx) {
    InputImage image = InputImage::zeros(size, size, 1);
    SegmentationMask mask = SegmentationMask::zeros(size, size, classes, kinds);
    std::vector<double> visible(static_cast<std::size_t>(size) * size, 0.0);

    for (int k = 1; k <= classes; ++k) {
      const double thickness = rng.uniform_range(spec.thickness_min, spec.thickness_max);
      const double radius = 0.5 * thickness;
      const double margin = radius + 2.0;
      const double y_lo = band_height * (k - 1) + margin;
      const double y_hi = band_height * k - margin;

      std::vector<double> dist(static_cast<std::size_t>(size) * size, 1e9);
      std::vector<double> param(static_cast<std::size_t>(size) * size, 0.0);

      bool faded = false;
      double fade_center = 0.0, fade_half = 0.0;

      if (kinds[static_cast<std::size_t>(k - 1)] == ClassKind::kCurvilinear) {
        const std::string& family = spec.curve_families[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(spec.curve_families.size())))];
        const auto pts = sample_stroke(family, y_lo, y_hi, size, rng);
        rasterize_stroke(pts, radius, size, dist, param);
        faded = rng.uniform() < spec.gap_probability;
        fade_center = rng.uniform_range(0.25, 0.75);
        fade_half = 0.5 * spec.gap_length_frac;
      } else {
        // volumetric blob: filled ellipse
        const double ry = rng.uniform_range(2.0, 0.5 * (y_hi - y_lo));
        const double rx = rng.uniform_range(ry, std::min(0.25 * size, 2.5 * ry));
        const double cy = rng.uniform_range(y_lo + ry, y_hi - ry);
        const double cx = rng.uniform_range(rx + 3.0, size - rx - 4.0);
        const double edge = std::min(rx, ry);
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            const double rho =
                std::sqrt(((y - cy) / ry) * ((y - cy) / ry) + ((x - cx) / rx) * ((x - cx) / rx));
            // signed distance approximation: positive inside
            dist[static_cast<std::size_t>(y * size + x)] = radius - (1.0 - rho) * edge;
          }
      }

      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const std::size_t idx = static_cast<std::size_t>(y * size + x);
          const double coverage = std::min(std::max(0.5 + (radius - dist[idx]), 0.0), 1.0);
          if (coverage >= 0.5) mask.set(y, x, static_cast<std::uint8_t>(k));
          double mu = 1.0;
          if (faded) {
            const double off = std::abs(param[idx] - fade_center) / fade_half;
            mu = off >= 1.0 ? 1.0 : off * off;
          }
          const double v = coverage * mu;
          if (v > visible[idx]) visible[idx] = v;
        }
      }
    }

    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y * size + x);
        double v = spec.background + spec.contrast * visible[idx];
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
        image.at(0, y, x) = std::min(std::max(v, 0.0), 1.0);
      }

    out.push_back({std::move(image), std::move(mask)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  nlohmann::json j;
  in >> j;

  DatasetManifest m;
  m.num_classes = j.at("num_classes").get<int>();
  m.image_channels = j.value("image_channels", 1);
  for (const auto& kind : j.at("class_kind"))
    m.class_kind.push_back(class_kind_from_string(kind.get<std::string>()));
  if (static_cast<int>(m.class_kind.size()) != m.num_classes)
    throw std::runtime_error("manifest: class_kind must list one entry per class");
  for (const auto& item : j.at("items"))
    m.items.push_back({item.at("image").get<std::string>(), item.at("mask").get<std::string>()});
  m.base_dir = fs::path(path).parent_path().string();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["num_classes"] = manifest.num_classes;
  j["image_channels"] = manifest.image_channels;
  nlohmann::json kinds = nlohmann::json::array();
  for (const auto& k : manifest.class_kind) kinds.push_back(to_string(k));
  j["class_kind"] = kinds;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : manifest.items)
    items.push_back({{"image", item.image}, {"mask", item.mask}});
  j["items"] = items;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

std::vector<Sample> load_dataset(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  const fs::path base(manifest.base_dir);
  for (const auto& item : manifest.items) {
    Sample s;
    s.image = load_image((base / item.image).string(), manifest.image_channels);
    s.mask = load_mask((base / item.mask).string(), manifest.num_classes, manifest.class_kind);
    if (s.image.height != s.mask.height || s.image.width != s.mask.width)
      throw std::runtime_error("dataset item has mismatched image/mask dims: " + item.image);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patch protocol
// ---------------------------------------------------------------------------

void PatchProtocol::validate() const {
  if (train_crop < 1 || test_window < 1 || test_stride < 1 || test_stride > test_window)
    throw std::invalid_argument("PatchProtocol: need 1 <= stride <= window");
}

std::vector<WindowRect> sliding_windows(int height, int width, int window, int stride) {
  if (window < 1 || stride < 1 || stride > window)
    throw std::invalid_argument("sliding_windows: need 1 <= stride <= window");
  auto starts = [&](int dim) {
    if (window >= dim) return std::vector<int>{0};
    std::vector<int> s;
    for (int v = 0; v + window <= dim; v += stride) s.push_back(v);
    if (s.back() != dim - window) s.push_back(dim - window);
    return s;
  };
  const int wh = std::min(window, height);
  const int ww = std::min(window, width);
  std::vector<WindowRect> rects;
  for (int y : starts(height))
    for (int x : starts(width)) rects.push_back({y, x, wh, ww});
  return rects;
}

namespace {

int reflect_index(int i, int dim) { return i < dim ? i : 2 * dim - 2 - i; }

InputImage pad_image_to(const InputImage& image, int h, int w) {
  if (image.height >= h && image.width >= w) return image;
  InputImage out = InputImage::zeros(std::max(h, image.height), std::max(w, image.width),
                                     image.channels);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.at(c, y, x) = image.at(c, reflect_index(y, image.height), reflect_index(x, image.width));
  return out;
}

SegmentationMask pad_mask_to(const SegmentationMask& mask, int h, int w) {
  if (mask.height >= h && mask.width >= w) return mask;
  SegmentationMask out = SegmentationMask::zeros(std::max(h, mask.height),
                                                 std::max(w, mask.width), mask.num_classes,
                                                 mask.class_kind);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.set(y, x, mask.at(reflect_index(y, mask.height), reflect_index(x, mask.width)));
  return out;
}

}  // namespace

Sample random_crop(const InputImage& image, const SegmentationMask& mask, int size, Rng& rng) {
  if (image.height != mask.height || image.width != mask.width)
    throw std::invalid_argument("random_crop: image and mask shapes differ");
  const InputImage img = pad_image_to(image, size, size);
  const SegmentationMask msk = pad_mask_to(mask, size, size);
  const int y0 = rng.uniform_int(img.height - size + 1);
  const int x0 = rng.uniform_int(img.width - size + 1);

  Sample out;
  out.image = InputImage::zeros(size, size, img.channels);
  out.mask = SegmentationMask::zeros(size, size, msk.num_classes, msk.class_kind);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.image.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.mask.set(y, x, msk.at(y0 + y, x0 + x));
  return out;
}

InputImage crop_image(const InputImage& image, const WindowRect& rect) {
  InputImage out = InputImage::zeros(rect.h, rect.w, image.channels);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < rect.h; ++y)
      for (int x = 0; x < rect.w; ++x) out.at(c, y, x) = image.at(c, rect.y + y, rect.x + x);
  return out;
}

ProbabilityMap stitch(const std::vector<ProbabilityMap>& patches,
                      const std::vector<WindowRect>& rects, int height, int width) {
  if (patches.size() != rects.size() || patches.empty())
    throw std::invalid_argument("stitch: patches and rects must align");
  const int channels = patches[0].channels;
  ProbabilityMap out = ProbabilityMap::zeros(height, width, channels);
  std::vector<int> counts(static_cast<std::size_t>(height) * width, 0);

  for (std::size_t p = 0; p < patches.size(); ++p) {
    const ProbabilityMap& patch = patches[p];
    const WindowRect& r = rects[p];
    if (patch.height != r.h || patch.width != r.w || patch.channels != channels)
      throw std::invalid_argument("stitch: patch does not match its rect");
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x) {
        ++counts[static_cast<std::size_t>((r.y + y) * width + (r.x + x))];
        for (int c = 0; c < channels; ++c)
          out.at(c, r.y + y, r.x + x) += patch.at(c, y, x);
      }
  }

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int n = counts[static_cast<std::size_t>(y * width + x)];
      if (n == 0)
        throw std::invalid_argument("stitch: pixel (" + std::to_string(y) + "," +
                                    std::to_string(x) + ") not covered by any window");
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) {
        out.at(c, y, x) /= n;
        sum += out.at(c, y, x);
      }
      if (channels >= 2) {
        if (sum > 0.0)
          for (int c = 0; c < channels; ++c) out.at(c, y, x) /= sum;
        else
          for (int c = 0; c < channels; ++c) out.at(c, y, x) = 1.0 / channels;
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// DRIVE
// ---------------------------------------------------------------------------

DriveSet load_drive(const std::string& root_dir) {
  const fs::path root(root_dir);
  std::vector<std::string> missing;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 21; i <= 40; ++i) {
    const std::string image =
        (root / "training" / "images" / (std::to_string(i) + "_training.png")).string();
    const std::string manual =
        (root / "training" / "1st_manual" / (std::to_string(i) + "_manual1.png")).string();
    if (!fs::exists(image)) missing.push_back(image);
    if (!fs::exists(manual)) missing.push_back(manual);
    pairs.emplace_back(image, manual);
  }
  if (!missing.empty()) {
    std::ostringstream oss;
    oss << "load_drive: " << missing.size() << " expected file(s) missing:";
    for (const auto& m : missing) oss << "\n  " << m;
    throw std::runtime_error(oss.str());
  }
  std::sort(pairs.begin(), pairs.end());

  DriveSet out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Sample s;
    s.image = load_image(pairs[i].first, 1);
    // manual annotations use 0/255; binarize into class 1
    const png::Image8 raw = png::read(pairs[i].second);
    if (raw.channels != 1)
      throw std::runtime_error("load_drive: manual mask must be grayscale: " + pairs[i].second);
    s.mask = SegmentationMask::zeros(raw.height, raw.width, 1, {ClassKind::kCurvilinear});
    for (std::size_t j = 0; j < raw.data.size(); ++j) s.mask.labels[j] = raw.data[j] > 127;
    if (i < 16)
      out.train.push_back(std::move(s));
    else
      out.test.push_back(std::move(s));
  }
  return out;
}

}  // namespace dtu
