#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dtu/core.hpp"
#include "dtu/png_io.hpp"
#include "dtu/rng.hpp"

using namespace dtu;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "dtu_core_test";
  fs::create_directories(dir);
  return dir;
}

SegmentationMask random_mask(int h, int w, int c, Rng& rng) {
  SegmentationMask m = SegmentationMask::zeros(h, w, c);
  for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.uniform_int(c + 1));
  return m;
}

}  // namespace

TEST_CASE("binarize_mask maps any foreground to class 1") {
  SegmentationMask zero = SegmentationMask::zeros(8, 8, 5);
  const SegmentationMask bz = binarize_mask(zero);
  CHECK(bz.num_classes == 1);
  CHECK(bz.foreground_count() == 0);

  SegmentationMask m = SegmentationMask::zeros(4, 4, 5);
  m.set(0, 0, 3);
  m.set(1, 2, 5);
  const SegmentationMask b = binarize_mask(m);
  CHECK(b.at(0, 0) == 1);
  CHECK(b.at(1, 2) == 1);
  CHECK(b.at(2, 2) == 0);
  CHECK(b.foreground_count() == m.foreground_count());

  // checkerboard of class 2 keeps its support
  SegmentationMask cb = SegmentationMask::zeros(6, 6, 2);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      if ((y + x) % 2 == 0) cb.set(y, x, 2);
  const SegmentationMask bcb = binarize_mask(cb);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) CHECK(bcb.at(y, x) == ((y + x) % 2 == 0 ? 1 : 0));
}

TEST_CASE("one_hot places unit mass at the labeled class") {
  SegmentationMask m = SegmentationMask::zeros(2, 2, 2);
  m.set(0, 1, 2);
  const ProbabilityMap p = one_hot(m);
  CHECK(p.channels == 3);
  CHECK(p.at(0, 0, 0) == 1.0);
  CHECK(p.at(1, 0, 0) == 0.0);
  CHECK(p.at(2, 0, 1) == 1.0);
  CHECK(p.at(0, 0, 1) == 0.0);
  p.validate();
}

TEST_CASE("argmax(one_hot(G)) == G for random masks") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const SegmentationMask m = random_mask(9, 13, 4, rng);
    const SegmentationMask back = argmax_mask(one_hot(m), m.class_kind);
    CHECK(back.labels == m.labels);
  }
}

TEST_CASE("mask PNG round trip is bit-exact") {
  Rng rng(11);
  const SegmentationMask m = random_mask(32, 32, 6, rng);
  const auto path = (temp_dir() / "mask_rt.png").string();
  save_mask(m, path);
  const SegmentationMask back = load_mask(path, 6);
  CHECK(back.labels == m.labels);
  CHECK(back.height == m.height);
  CHECK(back.width == m.width);
}

TEST_CASE("load_mask rejects out-of-range class values") {
  png::Image8 img;
  img.height = 4;
  img.width = 4;
  img.channels = 1;
  img.data.assign(16, 0);
  img.data[5] = 255;
  const auto path = (temp_dir() / "mask_bad.png").string();
  png::write(img, path);
  CHECK_THROWS_WITH_AS(load_mask(path, 6), doctest::Contains("class-range"),
                       std::runtime_error);
}

TEST_CASE("all-zero PNG loads as all-background") {
  png::Image8 img;
  img.height = 64;
  img.width = 64;
  img.channels = 1;
  img.data.assign(64 * 64, 0);
  const auto path = (temp_dir() / "mask_zero.png").string();
  png::write(img, path);
  const SegmentationMask m = load_mask(path, 3);
  CHECK(m.foreground_count() == 0);
}

TEST_CASE("probability map file round trip") {
  Rng rng(3);
  ProbabilityMap p = ProbabilityMap::zeros(10, 7, 4);
  const std::size_t plane = 70;
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    double vals[4];
    for (int c = 0; c < 4; ++c) sum += vals[c] = rng.uniform() + 1e-3;
    for (int c = 0; c < 4; ++c)
      p.probs[static_cast<std::size_t>(c) * plane + i] = static_cast<float>(vals[c] / sum);
  }
  const auto path = (temp_dir() / "map.probs").string();
  save_probmap(p, path);
  const ProbabilityMap back = load_probmap(path);
  CHECK(back.channels == 4);
  REQUIRE(back.probs.size() == p.probs.size());
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    // save quantizes to float32; stored values round-trip exactly
    CHECK(back.probs[i] == static_cast<double>(static_cast<float>(p.probs[i])));
  }
  back.validate(1e-5);
}

TEST_CASE("probmap payload shorter than header is rejected") {
  const auto path = (temp_dir() / "short.probs").string();
  {
    std::ofstream payload(path, std::ios::binary);
    const float data[3] = {0.1f, 0.2f, 0.7f};
    payload.write(reinterpret_cast<const char*>(data), sizeof(data));
    std::ofstream hdr(path + ".hdr");
    hdr << "2 2 3\n";
  }
  CHECK_THROWS_WITH_AS(load_probmap(path), doctest::Contains("size mismatch"),
                       std::runtime_error);
}

TEST_CASE("image save/load normalizes to [0,1]") {
  InputImage img = InputImage::zeros(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(0, y, x) = (y * 16 + x) / 255.0;
  const auto path = (temp_dir() / "img.png").string();
  save_image(img, path);
  const InputImage back = load_image(path);
  back.validate();
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(back.at(0, y, x) == doctest::Approx(img.at(0, y, x)).epsilon(1e-9));
}

TEST_CASE("grayscale/rgb conversions") {
  InputImage rgb = InputImage::zeros(16, 16, 3);
  rgb.at(0, 0, 0) = 1.0;
  const InputImage gray = to_grayscale(rgb);
  CHECK(gray.channels == 1);
  CHECK(gray.at(0, 0, 0) == doctest::Approx(0.299));
  const InputImage back = to_rgb(gray);
  CHECK(back.channels == 3);
  CHECK(back.at(2, 0, 0) == doctest::Approx(0.299));
}

TEST_CASE("validation rejects malformed values") {
  InputImage img = InputImage::zeros(16, 16, 1);
  img.pixels[0] = 1.5;
  CHECK_THROWS_AS(img.validate(), std::invalid_argument);

  SegmentationMask m = SegmentationMask::zeros(4, 4, 2);
  m.labels[0] = 3;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);

  ProbabilityMap p = ProbabilityMap::zeros(4, 4, 2);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);  // sums are 0, not 1
}
