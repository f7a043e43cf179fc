#include "dtu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace dtu {

void BettiConfig::validate() const {
  if (stride < 1 || window < stride)
    throw std::invalid_argument("BettiConfig: need 1 <= stride <= window");
  if (connectivity != 4 && connectivity != 8)
    throw std::invalid_argument("BettiConfig: connectivity must be 4 or 8");
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

// Component count of a binary view; binary is row-major over (full_w columns).
int count_components_view(const std::uint8_t* binary, int full_w, int y0, int x0, int h, int w,
                          int connectivity) {
  UnionFind uf(h * w);
  auto fg = [&](int y, int x) { return binary[(y0 + y) * full_w + (x0 + x)] != 0; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) continue;
      const int id = y * w + x;
      if (x > 0 && fg(y, x - 1)) uf.unite(id, id - 1);
      if (y > 0 && fg(y - 1, x)) uf.unite(id, id - w);
      if (connectivity == 8 && y > 0) {
        if (x > 0 && fg(y - 1, x - 1)) uf.unite(id, id - w - 1);
        if (x < w - 1 && fg(y - 1, x + 1)) uf.unite(id, id - w + 1);
      }
    }
  }
  int count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (fg(y, x) && uf.find(y * w + x) == y * w + x) ++count;
  return count;
}

std::vector<int> window_starts(int dim, int window, int stride) {
  if (window >= dim) return {0};
  std::vector<int> starts;
  for (int s = 0; s + window <= dim; s += stride) starts.push_back(s);
  if (starts.back() != dim - window) starts.push_back(dim - window);
  return starts;
}

std::vector<std::uint8_t> binarize_labels(const SegmentationMask& mask) {
  std::vector<std::uint8_t> out(mask.labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.labels[i] > 0;
  return out;
}

}  // namespace

ComponentLabeling connected_components(const SegmentationMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
  const int h = mask.height, w = mask.width;
  UnionFind uf(h * w);
  auto fg = [&](int y, int x) { return mask.at(y, x) > 0; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) continue;
      const int id = y * w + x;
      if (x > 0 && fg(y, x - 1)) uf.unite(id, id - 1);
      if (y > 0 && fg(y - 1, x)) uf.unite(id, id - w);
      if (connectivity == 8 && y > 0) {
        if (x > 0 && fg(y - 1, x - 1)) uf.unite(id, id - w - 1);
        if (x < w - 1 && fg(y - 1, x + 1)) uf.unite(id, id - w + 1);
      }
    }
  }
  ComponentLabeling out;
  out.labels.assign(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::int32_t> root_label(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) continue;
      const int root = uf.find(y * w + x);
      if (root_label[static_cast<std::size_t>(root)] == 0)
        root_label[static_cast<std::size_t>(root)] = ++out.count;
      out.labels[static_cast<std::size_t>(y * w + x)] = root_label[static_cast<std::size_t>(root)];
    }
  }
  return out;
}

double betti_error(const SegmentationMask& pred, const SegmentationMask& gt,
                   const BettiConfig& cfg) {
  cfg.validate();
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("betti_error: shape mismatch");

  const std::vector<std::uint8_t> bp = binarize_labels(pred);
  const std::vector<std::uint8_t> bg = binarize_labels(gt);
  const std::vector<int> ys = window_starts(gt.height, cfg.window, cfg.stride);
  const std::vector<int> xs = window_starts(gt.width, cfg.window, cfg.stride);
  const int wh = std::min(cfg.window, gt.height);
  const int ww = std::min(cfg.window, gt.width);

  double total = 0.0;
  for (int y0 : ys) {
    for (int x0 : xs) {
      const int cp = count_components_view(bp.data(), gt.width, y0, x0, wh, ww, cfg.connectivity);
      const int cg = count_components_view(bg.data(), gt.width, y0, x0, wh, ww, cfg.connectivity);
      total += std::abs(cp - cg);
    }
  }
  return total / (static_cast<double>(ys.size()) * static_cast<double>(xs.size()));
}

namespace {

// One pass of Zhang-Suen thinning; step is 0 or 1. Returns true if changed.
bool thinning_pass(std::vector<std::uint8_t>& img, int h, int w, int step) {
  auto get = [&](int y, int x) -> int {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0;
    return img[static_cast<std::size_t>(y * w + x)];
  };
  std::vector<std::uint8_t> to_delete(static_cast<std::size_t>(h) * w, 0);
  bool changed = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!get(y, x)) continue;
      const int p2 = get(y - 1, x), p3 = get(y - 1, x + 1), p4 = get(y, x + 1);
      const int p5 = get(y + 1, x + 1), p6 = get(y + 1, x), p7 = get(y + 1, x - 1);
      const int p8 = get(y, x - 1), p9 = get(y - 1, x - 1);
      const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
      if (b < 2 || b > 6) continue;
      const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
      int a = 0;
      for (int i = 0; i < 8; ++i) a += seq[i] == 0 && seq[i + 1] == 1;
      if (a != 1) continue;
      const int c1 = step == 0 ? p2 * p4 * p6 : p2 * p4 * p8;
      const int c2 = step == 0 ? p4 * p6 * p8 : p2 * p6 * p8;
      if (c1 != 0 || c2 != 0) continue;
      to_delete[static_cast<std::size_t>(y * w + x)] = 1;
      changed = true;
    }
  }
  if (changed)
    for (std::size_t i = 0; i < img.size(); ++i)
      if (to_delete[i]) img[i] = 0;
  return changed;
}

std::vector<std::uint8_t> zhang_suen_skeleton(std::vector<std::uint8_t> img, int h, int w) {
  bool changed = true;
  while (changed) {
    changed = thinning_pass(img, h, w, 0);
    changed = thinning_pass(img, h, w, 1) || changed;
  }
  return img;
}

// BFS over 8-connected skeleton pixels; returns (farthest pixel, parents).
std::pair<int, std::vector<int>> bfs_farthest(const std::vector<std::uint8_t>& skel, int h, int w,
                                              int start) {
  std::vector<int> dist(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> parent(static_cast<std::size_t>(h) * w, -1);
  std::queue<int> q;
  dist[static_cast<std::size_t>(start)] = 0;
  q.push(start);
  int best = start;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    const int y = cur / w, x = cur % w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dy == 0 && dx == 0) continue;
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int nid = ny * w + nx;
        if (!skel[static_cast<std::size_t>(nid)] || dist[static_cast<std::size_t>(nid)] >= 0)
          continue;
        dist[static_cast<std::size_t>(nid)] = dist[static_cast<std::size_t>(cur)] + 1;
        parent[static_cast<std::size_t>(nid)] = cur;
        q.push(nid);
        if (dist[static_cast<std::size_t>(nid)] > dist[static_cast<std::size_t>(best)] ||
            (dist[static_cast<std::size_t>(nid)] == dist[static_cast<std::size_t>(best)] && nid < best))
          best = nid;
      }
    }
  }
  return {best, parent};
}

}  // namespace

Curve extract_curve(const SegmentationMask& mask, int class_id) {
  if (class_id < 1 || class_id > mask.num_classes)
    throw std::invalid_argument("extract_curve: class_id out of range");
  const int h = mask.height, w = mask.width;

  SegmentationMask single = SegmentationMask::zeros(h, w, 1, {ClassKind::kCurvilinear});
  std::size_t pixel_count = 0;
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] == class_id) {
      single.labels[i] = 1;
      ++pixel_count;
    }
  }
  if (pixel_count == 0)
    throw std::invalid_argument("extract_curve: class has no pixels (absent structure)");

  // Keep only the largest connected component.
  const ComponentLabeling comps = connected_components(single, 8);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(comps.count) + 1, 0);
  for (auto l : comps.labels) ++sizes[static_cast<std::size_t>(l)];
  int largest = 1;
  for (int c = 2; c <= comps.count; ++c)
    if (sizes[static_cast<std::size_t>(c)] > sizes[static_cast<std::size_t>(largest)]) largest = c;

  std::vector<std::uint8_t> binary(static_cast<std::size_t>(h) * w, 0);
  int first = -1;
  for (std::size_t i = 0; i < binary.size(); ++i) {
    binary[i] = comps.labels[i] == largest;
    if (binary[i] && first < 0) first = static_cast<int>(i);
  }

  std::vector<std::uint8_t> skel = zhang_suen_skeleton(binary, h, w);
  int start = -1;
  for (std::size_t i = 0; i < skel.size(); ++i) {
    if (skel[i]) {
      start = static_cast<int>(i);
      break;
    }
  }
  if (start < 0) {
    // thinning can annihilate tiny blobs (e.g. a 2x2 square); fall back to
    // the component itself
    skel = std::move(binary);
    start = first;
  }

  const auto [endpoint, _] = bfs_farthest(skel, h, w, start);
  const auto [other_end, parent] = bfs_farthest(skel, h, w, endpoint);

  Curve curve;
  for (int cur = other_end; cur >= 0; cur = parent[static_cast<std::size_t>(cur)])
    curve.points.emplace_back(cur / w, cur % w);
  // fixed orientation: lexicographically smaller endpoint first
  if (curve.points.back() < curve.points.front())
    std::reverse(curve.points.begin(), curve.points.end());
  return curve;
}

double frechet_distance(const Curve& a, const Curve& b) {
  if (a.points.empty() || b.points.empty())
    throw std::invalid_argument("frechet_distance: curves must be nonempty");
  const std::size_t m = a.points.size(), n = b.points.size();
  auto point_dist = [&](std::size_t i, std::size_t j) {
    const double dy = a.points[i].first - b.points[j].first;
    const double dx = a.points[i].second - b.points[j].second;
    return std::sqrt(dy * dy + dx * dx);
  };
  std::vector<double> prev(n), cur(n);
  for (std::size_t j = 0; j < n; ++j)
    prev[j] = j == 0 ? point_dist(0, 0) : std::max(prev[j - 1], point_dist(0, j));
  for (std::size_t i = 1; i < m; ++i) {
    cur[0] = std::max(prev[0], point_dist(i, 0));
    for (std::size_t j = 1; j < n; ++j)
      cur[j] = std::max(point_dist(i, j), std::min({prev[j], cur[j - 1], prev[j - 1]}));
    std::swap(prev, cur);
  }
  return prev[n - 1];
}

namespace {

struct ClassCounts {
  std::size_t inter = 0;
  std::size_t uni = 0;
};

void accumulate_counts(const SegmentationMask& pred, const SegmentationMask& gt,
                       std::vector<ClassCounts>& per_class) {
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int p = pred.labels[i], g = gt.labels[i];
    if (p == g && g > 0) ++per_class[static_cast<std::size_t>(g - 1)].inter;
    if (p > 0) ++per_class[static_cast<std::size_t>(p - 1)].uni;
    if (g > 0 && g != p) ++per_class[static_cast<std::size_t>(g - 1)].uni;
  }
}

IoUFamily family_from_counts(const std::vector<ClassCounts>& per_class,
                             const std::vector<ClassKind>& kinds) {
  auto pooled = [&](ClassKind kind, bool any) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
      if (!any && kinds[k] != kind) continue;
      inter += per_class[k].inter;
      uni += per_class[k].uni;
    }
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  };
  auto mean_class = [&](ClassKind kind, bool any) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
      if (!any && kinds[k] != kind) continue;
      if (per_class[k].uni == 0) continue;  // class absent from both masks
      sum += static_cast<double>(per_class[k].inter) / static_cast<double>(per_class[k].uni);
      ++n;
    }
    return n > 0 ? sum / n : 1.0;
  };
  IoUFamily f;
  f.iou = pooled(ClassKind::kCurvilinear, true);
  f.miou = mean_class(ClassKind::kCurvilinear, true);
  f.c_iou = pooled(ClassKind::kCurvilinear, false);
  f.cm_iou = mean_class(ClassKind::kCurvilinear, false);
  f.v_iou = pooled(ClassKind::kVolumetric, false);
  f.vm_iou = mean_class(ClassKind::kVolumetric, false);
  return f;
}

}  // namespace

IoUFamily iou_family(const SegmentationMask& pred, const SegmentationMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width ||
      pred.num_classes != gt.num_classes)
    throw std::invalid_argument("iou_family: shape or class-count mismatch");
  std::vector<ClassCounts> per_class(static_cast<std::size_t>(gt.num_classes));
  accumulate_counts(pred, gt, per_class);
  return family_from_counts(per_class, gt.class_kind);
}

MetricReport evaluate(const std::vector<SegmentationMask>& preds,
                      const std::vector<SegmentationMask>& gts, const EvalConfig& cfg) {
  if (preds.size() != gts.size() || preds.empty())
    throw std::invalid_argument("evaluate: prediction and ground-truth sets must align");

  std::vector<ClassCounts> per_class(static_cast<std::size_t>(gts[0].num_classes));
  double betti_sum = 0.0;
  double frechet_sum = 0.0;
  std::size_t frechet_pairs = 0;
  double coverage_sum = 0.0;
  std::size_t coverage_n = 0;

  for (std::size_t i = 0; i < gts.size(); ++i) {
    const SegmentationMask& pred = preds[i];
    const SegmentationMask& gt = gts[i];
    if (pred.height != gt.height || pred.width != gt.width ||
        pred.num_classes != gt.num_classes)
      throw std::invalid_argument("evaluate: pair " + std::to_string(i) + " is misaligned");

    accumulate_counts(pred, gt, per_class);
    betti_sum += betti_error(pred, gt, cfg.betti);

    const double diagonal = std::sqrt(static_cast<double>(gt.height) * gt.height +
                                      static_cast<double>(gt.width) * gt.width);
    for (int k = 1; k <= gt.num_classes; ++k) {
      if (gt.class_kind[static_cast<std::size_t>(k - 1)] != ClassKind::kCurvilinear) continue;
      std::size_t np = 0, ng = 0;
      for (std::size_t j = 0; j < gt.labels.size(); ++j) {
        np += pred.labels[j] == k;
        ng += gt.labels[j] == k;
      }
      if (np == 0 && ng == 0) continue;
      if (np == 0 || ng == 0) {
        frechet_sum += diagonal;  // absent-structure penalty
        ++frechet_pairs;
        continue;
      }
      const Curve cp = extract_curve(pred, k);
      const Curve cg = extract_curve(gt, k);
      frechet_sum += frechet_distance(cp, cg);
      ++frechet_pairs;

      auto largest_fraction = [&](const SegmentationMask& m, std::size_t total) {
        SegmentationMask single = SegmentationMask::zeros(m.height, m.width, 1);
        for (std::size_t j = 0; j < m.labels.size(); ++j) single.labels[j] = m.labels[j] == k;
        const ComponentLabeling c = connected_components(single, 8);
        std::vector<std::size_t> sizes(static_cast<std::size_t>(c.count) + 1, 0);
        for (auto l : c.labels) ++sizes[static_cast<std::size_t>(l)];
        std::size_t largest = 0;
        for (int cc = 1; cc <= c.count; ++cc)
          largest = std::max(largest, sizes[static_cast<std::size_t>(cc)]);
        return static_cast<double>(largest) / static_cast<double>(total);
      };
      coverage_sum += 0.5 * (largest_fraction(pred, np) + largest_fraction(gt, ng));
      ++coverage_n;
    }
  }

  MetricReport report;
  const IoUFamily fam = family_from_counts(per_class, gts[0].class_kind);
  report.iou = fam.iou;
  report.miou = fam.miou;
  report.c_iou = fam.c_iou;
  report.cm_iou = fam.cm_iou;
  report.v_iou = fam.v_iou;
  report.vm_iou = fam.vm_iou;
  report.betti_error = betti_sum / static_cast<double>(gts.size());
  report.frechet = frechet_pairs > 0 ? frechet_sum / static_cast<double>(frechet_pairs) : 0.0;
  report.frechet_coverage = coverage_n > 0 ? coverage_sum / static_cast<double>(coverage_n) : 1.0;
  report.betti_window = cfg.betti.window;
  report.betti_stride = cfg.betti.stride;
  return report;
}

std::string MetricReport::csv_header() const {
  return "frechet,frechet_coverage,betti_error,iou,miou,c_iou,cm_iou,v_iou,vm_iou,"
         "betti_window,betti_stride";
}

std::string MetricReport::csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%d,%d",
                frechet, frechet_coverage, betti_error, iou * 100.0, miou * 100.0,
                c_iou * 100.0, cm_iou * 100.0, v_iou * 100.0, vm_iou * 100.0, betti_window,
                betti_stride);
  return buf;
}

std::string MetricReport::table() const {
  std::ostringstream oss;
  char buf[256];
  oss << "metric           value\n";
  std::snprintf(buf, sizeof(buf), "frechet        %8.4f\n", frechet);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "betti_error    %8.4f  (window %d, stride %d)\n", betti_error,
                betti_window, betti_stride);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "iou            %8.2f\n", iou * 100.0);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "miou           %8.2f\n", miou * 100.0);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "c_iou          %8.2f\n", c_iou * 100.0);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "cm_iou         %8.2f\n", cm_iou * 100.0);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "v_iou          %8.2f\n", v_iou * 100.0);
  oss << buf;
  std::snprintf(buf, sizeof(buf), "vm_iou         %8.2f\n", vm_iou * 100.0);
  oss << buf;
  return oss.str();
}

}  // namespace dtu
