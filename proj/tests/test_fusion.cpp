#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dtu/fusion.hpp"
#include "dtu/rng.hpp"

using namespace dtu;

namespace {

// One-pixel maps make per-pixel algebra checks direct.
ProbabilityMap tex_pixel(std::initializer_list<double> probs) {
  ProbabilityMap p = ProbabilityMap::zeros(1, 1, static_cast<int>(probs.size()));
  int c = 0;
  for (double v : probs) p.at(c++, 0, 0) = v;
  return p;
}

ProbabilityMap top_pixel(double v) {
  ProbabilityMap p = ProbabilityMap::zeros(1, 1, 1);
  p.at(0, 0, 0) = v;
  return p;
}

ProbabilityMap random_simplex(int h, int w, int channels, Rng& rng) {
  ProbabilityMap p = ProbabilityMap::zeros(h, w, channels);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double v = rng.uniform_pos();
      p.probs[static_cast<std::size_t>(c) * plane + i] = v;
      sum += v;
    }
    for (int c = 0; c < channels; ++c) p.probs[static_cast<std::size_t>(c) * plane + i] /= sum;
  }
  return p;
}

}  // namespace

TEST_CASE("fuse: worked example (0.35, 0.39, 0.26)") {
  FusionConfig cfg;
  cfg.omega = 0.5;
  const ProbabilityMap out = fuse(tex_pixel({0.5, 0.3, 0.2}), top_pixel(0.8), cfg);
  CHECK(std::abs(out.at(0, 0, 0) - 0.35) < 1e-9);
  CHECK(std::abs(out.at(1, 0, 0) - 0.39) < 1e-9);
  CHECK(std::abs(out.at(2, 0, 0) - 0.26) < 1e-9);
  const double sum = out.at(0, 0, 0) + out.at(1, 0, 0) + out.at(2, 0, 0);
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("fuse: omega=1 reproduces the texture prediction exactly") {
  Rng rng(1);
  FusionConfig cfg;
  cfg.omega = 1.0;
  const ProbabilityMap tex = random_simplex(8, 8, 4, rng);
  ProbabilityMap top = ProbabilityMap::zeros(8, 8, 1);
  for (auto& v : top.probs) v = rng.uniform();
  const ProbabilityMap out = fuse(tex, top, cfg);
  CHECK(out.probs == tex.probs);  // bitwise: w*S/S == 1
}

TEST_CASE("fuse: omega=0 gives the topology-gated form") {
  Rng rng(2);
  FusionConfig cfg;
  cfg.omega = 0.0;
  const ProbabilityMap tex = random_simplex(4, 4, 3, rng);
  ProbabilityMap top = ProbabilityMap::zeros(4, 4, 1);
  for (auto& v : top.probs) v = rng.uniform();
  const ProbabilityMap out = fuse(tex, top, cfg);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const double ptop = top.at(0, y, x);
      const double s = tex.at(1, y, x) + tex.at(2, y, x);
      CHECK(out.at(0, y, x) == doctest::Approx(1.0 - ptop).epsilon(1e-12));
      for (int c = 1; c <= 2; ++c)
        CHECK(out.at(c, y, x) == doctest::Approx(ptop * tex.at(c, y, x) / s).epsilon(1e-12));
    }
}

TEST_CASE("fuse: normalization identity on random inputs") {
  Rng rng(3);
  for (double omega : {0.0, 0.3, 0.5, 0.9, 1.0}) {
    FusionConfig cfg;
    cfg.omega = omega;
    const ProbabilityMap tex = random_simplex(16, 16, 5, rng);
    ProbabilityMap top = ProbabilityMap::zeros(16, 16, 1);
    for (auto& v : top.probs) v = rng.uniform();
    const ProbabilityMap out = fuse(tex, top, cfg);
    out.validate(1e-5);
    const std::size_t plane = 256;
    for (std::size_t i = 0; i < plane; ++i) {
      double sum = 0.0;
      for (int c = 0; c < 5; ++c) sum += out.probs[static_cast<std::size_t>(c) * plane + i];
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("fuse: foreground class ratios are preserved") {
  Rng rng(4);
  FusionConfig cfg;
  cfg.omega = 0.4;
  const ProbabilityMap tex = random_simplex(8, 8, 4, rng);
  ProbabilityMap top = ProbabilityMap::zeros(8, 8, 1);
  for (auto& v : top.probs) v = rng.uniform();
  const ProbabilityMap out = fuse(tex, top, cfg);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int i = 1; i <= 3; ++i)
        for (int j = i + 1; j <= 3; ++j) {
          const double lhs = out.at(i, y, x) * tex.at(j, y, x);
          const double rhs = out.at(j, y, x) * tex.at(i, y, x);
          CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
}

TEST_CASE("fuse: monotone in p_top for omega < 1") {
  FusionConfig cfg;
  cfg.omega = 0.5;
  const ProbabilityMap tex = tex_pixel({0.6, 0.3, 0.1});
  double prev_bg = 2.0, prev_fg1 = -1.0, prev_fg2 = -1.0;
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const ProbabilityMap out = fuse(tex, top_pixel(t), cfg);
    CHECK(out.at(0, 0, 0) < prev_bg);
    CHECK(out.at(1, 0, 0) > prev_fg1);
    CHECK(out.at(2, 0, 0) > prev_fg2);
    prev_bg = out.at(0, 0, 0);
    prev_fg1 = out.at(1, 0, 0);
    prev_fg2 = out.at(2, 0, 0);
  }
}

TEST_CASE("fuse: vanishing foreground mass falls back to the uniform split") {
  FusionConfig cfg;
  cfg.omega = 0.5;
  const ProbabilityMap tex = tex_pixel({1.0, 0.0, 0.0});
  const ProbabilityMap out = fuse(tex, top_pixel(0.8), cfg);
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.5 * 0.2 + 0.5).epsilon(1e-12));
  CHECK(out.at(1, 0, 0) == doctest::Approx(0.5 * 0.8 / 2.0).epsilon(1e-12));
  CHECK(out.at(2, 0, 0) == doctest::Approx(0.5 * 0.8 / 2.0).epsilon(1e-12));
  const double sum = out.at(0, 0, 0) + out.at(1, 0, 0) + out.at(2, 0, 0);
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("fuse: shape and config validation") {
  FusionConfig cfg;
  CHECK_THROWS_AS(fuse(tex_pixel({1.0}), top_pixel(0.5), cfg), std::invalid_argument);
  CHECK_THROWS_AS(fuse(tex_pixel({0.5, 0.5}), tex_pixel({0.5, 0.5}), cfg),
                  std::invalid_argument);
  FusionConfig bad;
  bad.omega = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ProbabilityMap small = ProbabilityMap::zeros(2, 2, 1);
  CHECK_THROWS_AS(fuse(tex_pixel({0.5, 0.5}), small, bad), std::invalid_argument);
}
