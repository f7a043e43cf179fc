#include "dtu/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtu {

void CorruptionConfig::validate(int image_height, int image_width) const {
  if (!(lambda_end >= 0.0 && lambda_end <= lambda_start && lambda_start <= 1.0))
    throw std::invalid_argument("CorruptionConfig: need 0 <= lambda_end <= lambda_start <= 1");
  if (patch_size < 2) throw std::invalid_argument("CorruptionConfig: patch_size must be >= 2");
  if (image_height > 0 && image_width > 0 && patch_size > std::min(image_height, image_width))
    throw std::invalid_argument("CorruptionConfig: patch_size exceeds image dimensions");
}

SegmentationMask false_splits(const SegmentationMask& mask, double lam, int patch_size,
                              Rng& rng) {
  mask.validate();
  if (lam < 0.0 || lam > 1.0) throw std::invalid_argument("false_splits: lambda not in [0,1]");
  if (patch_size < 1) throw std::invalid_argument("false_splits: patch_size must be >= 1");

  SegmentationMask out = mask;
  const int tiles_y = (mask.height + patch_size - 1) / patch_size;
  const int tiles_x = (mask.width + patch_size - 1) / patch_size;

  std::vector<int> fg_tiles;
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int y1 = std::min((ty + 1) * patch_size, mask.height);
      const int x1 = std::min((tx + 1) * patch_size, mask.width);
      bool has_fg = false;
      for (int y = ty * patch_size; y < y1 && !has_fg; ++y)
        for (int x = tx * patch_size; x < x1 && !has_fg; ++x)
          if (mask.at(y, x) > 0) has_fg = true;
      if (has_fg) fg_tiles.push_back(ty * tiles_x + tx);
    }
  }
  if (fg_tiles.empty()) return out;

  const int n = static_cast<int>(fg_tiles.size());
  const int k = std::min(n, static_cast<int>(std::ceil(lam * n)));
  const std::vector<int> picks = rng.sample_without_replacement(n, k);
  for (int p : picks) {
    const int tile = fg_tiles[static_cast<std::size_t>(p)];
    const int ty = tile / tiles_x;
    const int tx = tile % tiles_x;
    const int y1 = std::min((ty + 1) * patch_size, mask.height);
    const int x1 = std::min((tx + 1) * patch_size, mask.width);
    for (int y = ty * patch_size; y < y1; ++y)
      for (int x = tx * patch_size; x < x1; ++x) out.set(y, x, 0);
  }
  return out;
}

namespace {

struct FgPixel {
  double intensity;
  int y;
  int x;
  std::uint8_t label;
};

// Most similar foreground pixel: min |intensity delta|, ties by squared
// spatial distance, then by row-major order. fg is sorted by intensity
// with row-major order as secondary key.
std::uint8_t most_similar_label(const std::vector<FgPixel>& fg, double intensity, int y, int x,
                                int width) {
  const auto cmp = [](const FgPixel& a, double v) { return a.intensity < v; };
  const auto lo = std::lower_bound(fg.begin(), fg.end(), intensity, cmp);

  double best_delta = -1.0;
  long long best_d2 = 0;
  long long best_order = 0;
  std::uint8_t best_label = 0;

  auto consider = [&](const FgPixel& p) {
    const double delta = std::abs(p.intensity - intensity);
    if (best_delta >= 0.0 && delta > best_delta) return false;  // run exhausted
    const long long dy = p.y - y, dx = p.x - x;
    const long long d2 = dy * dy + dx * dx;
    const long long order = static_cast<long long>(p.y) * width + p.x;
    if (best_delta < 0.0 || delta < best_delta || d2 < best_d2 ||
        (d2 == best_d2 && order < best_order)) {
      best_delta = delta;
      best_d2 = d2;
      best_order = order;
      best_label = p.label;
    }
    return true;
  };

  // Walk outward in both directions; each side stops once its delta exceeds
  // the best seen, which is valid because intensity is sorted.
  auto right = lo;
  auto left = lo;
  bool right_open = right != fg.end();
  bool left_open = left != fg.begin();
  while (right_open || left_open) {
    if (right_open) {
      if (!consider(*right)) {
        right_open = false;
      } else {
        ++right;
        right_open = right != fg.end();
        continue;  // keep draining the right side while it ties
      }
    }
    if (left_open) {
      auto prev = std::prev(left);
      if (!consider(*prev)) {
        left_open = false;
      } else {
        left = prev;
        left_open = left != fg.begin();
      }
    }
  }
  return best_label;
}

}  // namespace

SegmentationMask missed_splits(const SegmentationMask& mask, const InputImage& image,
                               double lam, Rng& rng) {
  mask.validate();
  if (lam < 0.0 || lam > 1.0) throw std::invalid_argument("missed_splits: lambda not in [0,1]");
  if (image.height != mask.height || image.width != mask.width)
    throw std::invalid_argument("missed_splits: image and mask shapes differ");

  std::vector<FgPixel> fg;
  double sum = 0.0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) > 0) {
        const double v = image.intensity(y, x);
        fg.push_back({v, y, x, mask.at(y, x)});
        sum += v;
      }
    }
  }
  if (fg.empty())
    throw std::invalid_argument("missed_splits: mask has no foreground, m and d are undefined");

  const double m = sum / static_cast<double>(fg.size());
  double var = 0.0;
  for (const FgPixel& p : fg) var += (p.intensity - m) * (p.intensity - m);
  const double d = std::sqrt(var / static_cast<double>(fg.size()));

  std::vector<int> candidates;  // row-major pixel index
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) > 0) continue;
      const double v = image.intensity(y, x);
      if (v >= m - d && v <= m + d) candidates.push_back(y * mask.width + x);
    }
  }

  SegmentationMask out = mask;
  if (candidates.empty()) return out;
  const int n = static_cast<int>(candidates.size());
  const int k = std::min(n, static_cast<int>(std::ceil(lam * n)));
  if (k == 0) return out;

  std::stable_sort(fg.begin(), fg.end(), [](const FgPixel& a, const FgPixel& b) {
    return a.intensity < b.intensity;
  });

  const std::vector<int> picks = rng.sample_without_replacement(n, k);
  for (int p : picks) {
    const int idx = candidates[static_cast<std::size_t>(p)];
    const int y = idx / mask.width;
    const int x = idx % mask.width;
    out.set(y, x, most_similar_label(fg, image.intensity(y, x), y, x, mask.width));
  }
  return out;
}

SegmentationMask corrupt(const SegmentationMask& mask, const InputImage& image, double lam,
                         const CorruptionConfig& cfg, Rng& rng) {
  if (cfg.missed_first) {
    const SegmentationMask mid = missed_splits(mask, image, lam, rng);
    return false_splits(mid, lam, cfg.patch_size, rng);
  }
  const SegmentationMask mid = false_splits(mask, lam, cfg.patch_size, rng);
  return missed_splits(mid, image, lam, rng);
}

double lambda_at(int epoch, int total_epochs, const CorruptionConfig& cfg) {
  if (total_epochs < 1) throw std::invalid_argument("lambda_at: total_epochs must be >= 1");
  if (epoch < 0 || epoch >= total_epochs)
    throw std::invalid_argument("lambda_at: epoch out of range");
  if (total_epochs == 1 || epoch == 0) return cfg.lambda_start;
  if (epoch == total_epochs - 1) return cfg.lambda_end;  // exact endpoint
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return cfg.lambda_start + (cfg.lambda_end - cfg.lambda_start) * t;
}

}  // namespace dtu
