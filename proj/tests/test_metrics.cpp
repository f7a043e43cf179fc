#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "dtu/metrics.hpp"
#include "dtu/rng.hpp"

using namespace dtu;

namespace {

// Independent flood-fill component counter.
int flood_fill_count(const SegmentationMask& mask, int connectivity) {
  const int h = mask.height, w = mask.width;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
  int count = 0;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (mask.at(sy, sx) == 0 || seen[static_cast<std::size_t>(sy * w + sx)]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({sy, sx});
      seen[static_cast<std::size_t>(sy * w + sx)] = 1;
      while (!q.empty()) {
        const auto [y, x] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (connectivity == 4 && dy != 0 && dx != 0) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            if (mask.at(ny, nx) == 0 || seen[static_cast<std::size_t>(ny * w + nx)]) continue;
            seen[static_cast<std::size_t>(ny * w + nx)] = 1;
            q.push({ny, nx});
          }
      }
    }
  return count;
}

// Exhaustive discrete Frechet via recursion over all monotone couplings.
double brute_frechet(const Curve& a, const Curve& b, std::size_t i, std::size_t j) {
  const double dy = a.points[i].first - b.points[j].first;
  const double dx = a.points[i].second - b.points[j].second;
  const double d = std::sqrt(dy * dy + dx * dx);
  if (i == 0 && j == 0) return d;
  double best = 1e300;
  if (i > 0) best = std::min(best, brute_frechet(a, b, i - 1, j));
  if (j > 0) best = std::min(best, brute_frechet(a, b, i, j - 1));
  if (i > 0 && j > 0) best = std::min(best, brute_frechet(a, b, i - 1, j - 1));
  return std::max(d, best);
}

Curve random_curve(int max_len, Rng& rng) {
  Curve c;
  int y = rng.uniform_int(12), x = rng.uniform_int(12);
  const int len = 1 + rng.uniform_int(max_len);
  c.points.emplace_back(y, x);
  for (int i = 1; i < len; ++i) {
    y += rng.uniform_int(3) - 1;
    x += rng.uniform_int(3) - 1;
    c.points.emplace_back(y, x);
  }
  return c;
}

SegmentationMask mask_from(const std::vector<std::string>& rows, int classes = 1) {
  SegmentationMask m = SegmentationMask::zeros(static_cast<int>(rows.size()),
                                               static_cast<int>(rows[0].size()), classes);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      if (ch != '.') m.set(y, x, static_cast<std::uint8_t>(ch - '0'));
    }
  return m;
}

}  // namespace

TEST_CASE("connected_components basics") {
  const SegmentationMask empty = SegmentationMask::zeros(8, 8, 1);
  CHECK(connected_components(empty, 8).count == 0);

  // two diagonal-touching pixels
  SegmentationMask diag = SegmentationMask::zeros(4, 4, 1);
  diag.set(1, 1, 1);
  diag.set(2, 2, 1);
  CHECK(connected_components(diag, 8).count == 1);
  CHECK(connected_components(diag, 4).count == 2);

  const SegmentationMask blobs = mask_from({
      "11..0000",
      "11......",
      "....22..",
      "....22..",
      "3.......",
  });
  CHECK(connected_components(blobs, 8).count == 3);
  CHECK(connected_components(blobs, 8).count == flood_fill_count(blobs, 8));
}

TEST_CASE("connected_components matches flood fill on random masks") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    SegmentationMask m = SegmentationMask::zeros(16, 16, 1);
    for (auto& v : m.labels) v = rng.uniform() < 0.4 ? 1 : 0;
    for (int conn : {4, 8}) {
      const ComponentLabeling lab = connected_components(m, conn);
      CHECK(lab.count == flood_fill_count(m, conn));
      // labeling is consistent: every foreground pixel holds a label in range
      for (std::size_t i = 0; i < m.labels.size(); ++i) {
        if (m.labels[i])
          CHECK((lab.labels[i] >= 1 && lab.labels[i] <= lab.count));
        else
          CHECK(lab.labels[i] == 0);
      }
    }
  }
}

TEST_CASE("betti_error: identical masks give zero") {
  Rng rng(4);
  SegmentationMask m = SegmentationMask::zeros(32, 32, 2);
  for (auto& v : m.labels) v = rng.uniform() < 0.2 ? 1 : 0;
  BettiConfig cfg;
  cfg.window = 16;
  cfg.stride = 8;
  CHECK(betti_error(m, m, cfg) == 0.0);
}

TEST_CASE("betti_error: full-width line vs line with one gap, whole-image window") {
  SegmentationMask gt = SegmentationMask::zeros(16, 32, 1);
  SegmentationMask pred = SegmentationMask::zeros(16, 32, 1);
  for (int x = 0; x < 32; ++x) {
    gt.set(8, x, 1);
    if (x != 16) pred.set(8, x, 1);
  }
  BettiConfig cfg;
  cfg.window = 64;  // larger than the image: single window
  cfg.stride = 32;
  CHECK(betti_error(pred, gt, cfg) == doctest::Approx(1.0));
}

TEST_CASE("betti_error is symmetric and relabel-invariant") {
  Rng rng(17);
  SegmentationMask a = SegmentationMask::zeros(24, 24, 3);
  SegmentationMask b = SegmentationMask::zeros(24, 24, 3);
  for (auto& v : a.labels) v = rng.uniform() < 0.25 ? static_cast<std::uint8_t>(1 + rng.uniform_int(3)) : 0;
  for (auto& v : b.labels) v = rng.uniform() < 0.25 ? static_cast<std::uint8_t>(1 + rng.uniform_int(3)) : 0;
  BettiConfig cfg;
  cfg.window = 8;
  cfg.stride = 4;
  CHECK(betti_error(a, b, cfg) == betti_error(b, a, cfg));

  SegmentationMask relabeled = a;
  for (auto& v : relabeled.labels)
    if (v != 0) v = static_cast<std::uint8_t>(4 - v);  // permute classes
  CHECK(betti_error(relabeled, b, cfg) == betti_error(a, b, cfg));
}

TEST_CASE("local topology discriminator: equal global Betti, nonzero windowed error") {
  // gt: a loop with a gap (one component); pred: the closed loop (one
  // component). Globally indistinguishable by component count.
  const int size = 64;
  SegmentationMask gt = SegmentationMask::zeros(size, size, 1);
  SegmentationMask pred = SegmentationMask::zeros(size, size, 1);
  const double cy = 32.0, cx = 32.0, r = 20.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
      if (std::abs(d - r) <= 1.2) {
        pred.set(y, x, 1);
        const bool in_gap = std::abs(y - cy) < 4.0 && x > static_cast<int>(cx);
        if (!in_gap) gt.set(y, x, 1);
      }
    }
  CHECK(connected_components(gt, 8).count == 1);
  CHECK(connected_components(pred, 8).count == 1);

  BettiConfig whole;
  whole.window = 64;
  whole.stride = 64;
  CHECK(betti_error(pred, gt, whole) == 0.0);  // global count blind to the error

  BettiConfig local;
  local.window = 16;
  local.stride = 8;
  CHECK(betti_error(pred, gt, local) > 0.0);
}

TEST_CASE("extract_curve: 1-pixel line is returned in order") {
  SegmentationMask m = SegmentationMask::zeros(8, 16, 1);
  for (int x = 2; x < 14; ++x) m.set(4, x, 1);
  const Curve c = extract_curve(m, 1);
  REQUIRE(c.points.size() == 12);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(c.points[i].first == 4);
    CHECK(c.points[i].second == 2 + static_cast<int>(i));
  }
}

TEST_CASE("extract_curve: 3-pixel-thick bar reduces to its centerline") {
  SegmentationMask m = SegmentationMask::zeros(9, 24, 1);
  for (int y = 3; y <= 5; ++y)
    for (int x = 2; x < 22; ++x) m.set(y, x, 1);
  const Curve c = extract_curve(m, 1);
  // thinning erodes up to two pixels per end on a 3-thick bar
  const std::size_t bar_len = 20;
  CHECK(c.points.size() >= bar_len - 4);
  CHECK(c.points.size() <= bar_len + 1);
  for (const auto& [y, x] : c.points) CHECK(y == 4);  // centered
}

TEST_CASE("extract_curve: plus shape yields the longer arm-to-arm path") {
  SegmentationMask m = SegmentationMask::zeros(21, 21, 1);
  for (int x = 1; x < 20; ++x) m.set(10, x, 1);  // long horizontal arm
  for (int y = 6; y <= 14; ++y) m.set(y, 10, 1); // short vertical arm
  const Curve c = extract_curve(m, 1);
  // longest simple path spans the horizontal arm end-to-end
  CHECK(c.points.front().first == 10);
  CHECK(c.points.back().first == 10);
  const int x0 = std::min(c.points.front().second, c.points.back().second);
  const int x1 = std::max(c.points.front().second, c.points.back().second);
  CHECK(x0 == 1);
  CHECK(x1 == 19);
}

TEST_CASE("extract_curve uses the largest component and rejects empty classes") {
  SegmentationMask m = SegmentationMask::zeros(16, 16, 2);
  for (int x = 0; x < 10; ++x) m.set(3, x, 1);
  m.set(12, 12, 1);  // small spur
  const Curve c = extract_curve(m, 1);
  CHECK(c.points.size() == 10);
  CHECK_THROWS_AS(extract_curve(m, 2), std::invalid_argument);
}

TEST_CASE("frechet_distance basics") {
  Curve a, b;
  for (int x = 0; x < 10; ++x) a.points.emplace_back(0, x);
  CHECK(frechet_distance(a, a) == 0.0);
  for (int x = 0; x < 10; ++x) b.points.emplace_back(5, x);
  CHECK(frechet_distance(a, b) == doctest::Approx(5.0));
  CHECK(frechet_distance(b, a) == doctest::Approx(5.0));
}

TEST_CASE("frechet_distance equals exhaustive coupling enumeration (<=8 points)") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const Curve a = random_curve(8, rng);
    const Curve b = random_curve(8, rng);
    const double dp = frechet_distance(a, b);
    const double brute = brute_frechet(a, b, a.points.size() - 1, b.points.size() - 1);
    CHECK(dp == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("frechet_distance properties: translation invariance and endpoint bound") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Curve a = random_curve(8, rng);
    Curve b = random_curve(8, rng);
    const double d = frechet_distance(a, b);
    CHECK(d >= 0.0);

    auto end_dist = [](const Curve& u, const Curve& v, bool front) {
      const auto& p = front ? u.points.front() : u.points.back();
      const auto& q = front ? v.points.front() : v.points.back();
      const double dy = p.first - q.first, dx = p.second - q.second;
      return std::sqrt(dy * dy + dx * dx);
    };
    CHECK(d >= end_dist(a, b, true) - 1e-12);
    CHECK(d >= end_dist(a, b, false) - 1e-12);

    Curve at = a, bt = b;
    for (auto& p : at.points) {
      p.first += 7;
      p.second -= 3;
    }
    for (auto& p : bt.points) {
      p.first += 7;
      p.second -= 3;
    }
    CHECK(frechet_distance(at, bt) == doctest::Approx(d).epsilon(1e-12));
  }
}

TEST_CASE("iou_family: identity, disjoint, half-overlap") {
  SegmentationMask gt = SegmentationMask::zeros(16, 16, 2,
                                                {ClassKind::kCurvilinear, ClassKind::kVolumetric});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) gt.set(y, x, 1);
  for (int y = 8; y < 12; ++y)
    for (int x = 0; x < 8; ++x) gt.set(y, x, 2);

  const IoUFamily same = iou_family(gt, gt);
  CHECK(same.iou == 1.0);
  CHECK(same.miou == 1.0);
  CHECK(same.c_iou == 1.0);
  CHECK(same.vm_iou == 1.0);

  // disjoint equal-area prediction for class 1, class 2 untouched
  SegmentationMask pred = gt;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 16; ++x) pred.set(y, x, x < 8 ? 0 : 1);
  const IoUFamily dis = iou_family(pred, gt);
  CHECK(dis.c_iou == 0.0);
  CHECK(dis.vm_iou == 1.0);

  // half-overlap strips: |I| = A/2, |U| = 3A/2 -> 1/3
  SegmentationMask half = gt;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 12; ++x) half.set(y, x, x < 4 ? 0 : 1);
  const IoUFamily h = iou_family(half, gt);
  CHECK(h.c_iou == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("evaluate: identity set gives perfect report") {
  Rng rng(5);
  std::vector<SegmentationMask> masks;
  for (int i = 0; i < 3; ++i) {
    SegmentationMask m = SegmentationMask::zeros(32, 32, 1);
    for (int x = 4; x < 28; ++x) m.set(8 + i, x, 1);
    masks.push_back(m);
  }
  EvalConfig cfg;
  cfg.betti.window = 16;
  cfg.betti.stride = 8;
  const MetricReport report = evaluate(masks, masks, cfg);
  CHECK(report.frechet == 0.0);
  CHECK(report.betti_error == 0.0);
  CHECK(report.iou == 1.0);
  CHECK(report.miou == 1.0);
}

TEST_CASE("evaluate: absent structure takes the diagonal penalty") {
  SegmentationMask gt = SegmentationMask::zeros(32, 32, 1);
  for (int x = 4; x < 28; ++x) gt.set(16, x, 1);
  const SegmentationMask empty = SegmentationMask::zeros(32, 32, 1);
  EvalConfig cfg;
  cfg.betti.window = 16;
  cfg.betti.stride = 8;
  const MetricReport report = evaluate({empty}, {gt}, cfg);
  CHECK(report.frechet == doctest::Approx(std::sqrt(2.0) * 32.0));
  // both absent: pair skipped entirely
  const MetricReport none = evaluate({empty}, {empty}, cfg);
  CHECK(none.frechet == 0.0);
}

TEST_CASE("evaluate rejects misaligned sets") {
  const SegmentationMask a = SegmentationMask::zeros(16, 16, 1);
  const SegmentationMask b = SegmentationMask::zeros(16, 32, 1);
  EvalConfig cfg;
  CHECK_THROWS_AS(evaluate({a}, {b}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(evaluate({a, a}, {a}, cfg), std::invalid_argument);
}

TEST_CASE("BettiConfig validation") {
  BettiConfig bad;
  bad.stride = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = BettiConfig{};
  bad.connectivity = 6;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
