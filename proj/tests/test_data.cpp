#include <doctest.h>

#include <filesystem>
#include <set>

#include "dtu/data.hpp"
#include "dtu/metrics.hpp"
#include "dtu/png_io.hpp"

using namespace dtu;
namespace fs = std::filesystem;

TEST_CASE("synthetic: noiseless unfaded corpus equals thresholded image") {
  SyntheticSpec spec;
  spec.image_size = 64;
  spec.num_images = 4;
  spec.num_classes = 3;
  spec.contrast = 1.0;
  spec.background = 0.0;
  spec.noise_sigma = 0.0;
  spec.gap_probability = 0.0;
  Rng rng(1);
  const auto samples = generate_synthetic(spec, rng);
  REQUIRE(samples.size() == 4);
  for (const auto& s : samples) {
    s.image.validate();
    s.mask.validate();
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool fg = s.image.at(0, y, x) >= spec.background + spec.contrast / 2.0;
        CHECK(fg == (s.mask.at(y, x) > 0));
      }
  }
}

TEST_CASE("synthetic: identical seeds give bit-identical corpora") {
  SyntheticSpec spec;
  spec.num_images = 3;
  spec.rng_seed = 42;
  Rng r1(spec.rng_seed), r2(spec.rng_seed);
  const auto a = generate_synthetic(spec, r1);
  const auto b = generate_synthetic(spec, r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.pixels == b[i].image.pixels);
    CHECK(a[i].mask.labels == b[i].mask.labels);
  }
}

TEST_CASE("synthetic: every class renders exactly one component") {
  SyntheticSpec spec;
  spec.image_size = 96;
  spec.num_images = 10;
  spec.num_classes = 3;
  spec.num_volumetric = 1;
  Rng rng(7);
  const auto samples = generate_synthetic(spec, rng);
  for (const auto& s : samples) {
    for (int k = 1; k <= spec.total_classes(); ++k) {
      SegmentationMask single = SegmentationMask::zeros(s.mask.height, s.mask.width, 1);
      for (std::size_t i = 0; i < s.mask.labels.size(); ++i)
        single.labels[i] = s.mask.labels[i] == k;
      REQUIRE(single.foreground_count() > 0);
      CHECK(connected_components(single, 8).count == 1);
    }
  }
}

TEST_CASE("synthetic: faded segments dim the image but never the labels") {
  SyntheticSpec base;
  base.image_size = 64;
  base.num_images = 20;
  base.num_classes = 2;
  base.noise_sigma = 0.0;
  base.gap_probability = 0.0;

  SyntheticSpec faded = base;
  faded.gap_probability = 1.0;

  Rng r1(3), r2(3);
  const auto clean = generate_synthetic(base, r1);
  const auto gapped = generate_synthetic(faded, r2);

  std::size_t clean_fg = 0, gapped_fg = 0;
  double clean_mass = 0.0, gapped_mass = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean_fg += clean[i].mask.foreground_count();
    gapped_fg += gapped[i].mask.foreground_count();
    for (double v : clean[i].image.pixels) clean_mass += v;
    for (double v : gapped[i].image.pixels) gapped_mass += v;
  }
  // same RNG consumption pattern isn't guaranteed between branches, so only
  // aggregate behavior is asserted: labels keep full curves, intensity drops
  CHECK(gapped_fg > 0);
  CHECK(static_cast<double>(gapped_fg) > 0.9 * static_cast<double>(clean_fg));
  CHECK(gapped_mass < clean_mass);
}

TEST_CASE("synthetic: spec validation") {
  SyntheticSpec bad;
  bad.num_classes = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SyntheticSpec{};
  bad.contrast = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SyntheticSpec{};
  bad.curve_families = {"spiral"};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SyntheticSpec crowded;
  crowded.image_size = 16;
  crowded.num_classes = 5;
  Rng rng(1);
  CHECK_THROWS_AS(generate_synthetic(crowded, rng), std::invalid_argument);
}

TEST_CASE("sliding_windows: 565-wide case and full coverage") {
  const auto rects = sliding_windows(565, 565, 128, 64);
  std::set<int> xs;
  for (const auto& r : rects) xs.insert(r.x);
  const std::set<int> expected{0, 64, 128, 192, 256, 320, 384, 437};
  CHECK(xs == expected);

  std::vector<int> covered(565 * 565, 0);
  for (const auto& r : rects)
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) ++covered[static_cast<std::size_t>(y * 565 + x)];
  for (int c : covered) CHECK(c >= 1);
}

TEST_CASE("sliding_windows: stride == window tiles interior pixels exactly once") {
  const auto rects = sliding_windows(64, 64, 16, 16);
  CHECK(rects.size() == 16);
  std::vector<int> covered(64 * 64, 0);
  for (const auto& r : rects)
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) ++covered[static_cast<std::size_t>(y * 64 + x)];
  for (int c : covered) CHECK(c == 1);
}

TEST_CASE("sliding_windows: window larger than image collapses to one window") {
  const auto rects = sliding_windows(48, 32, 128, 64);
  REQUIRE(rects.size() == 1);
  CHECK(rects[0].h == 48);
  CHECK(rects[0].w == 32);
}

TEST_CASE("random_crop: offsets in range, reflect-pad when small") {
  Rng data_rng(5);
  InputImage img = InputImage::zeros(40, 40, 1);
  for (auto& v : img.pixels) v = data_rng.uniform();
  SegmentationMask mask = SegmentationMask::zeros(40, 40, 1);
  mask.set(20, 20, 1);

  Rng rng(9);
  const Sample crop = random_crop(img, mask, 16, rng);
  CHECK(crop.image.height == 16);
  CHECK(crop.mask.height == 16);

  const Sample padded = random_crop(img, mask, 64, rng);
  CHECK(padded.image.height == 64);
  padded.image.validate();
}

TEST_CASE("stitch: identity patches average back to the input") {
  Rng rng(11);
  ProbabilityMap full = ProbabilityMap::zeros(48, 48, 3);
  const std::size_t plane = 48 * 48;
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += full.probs[static_cast<std::size_t>(c) * plane + i] = rng.uniform_pos();
    for (int c = 0; c < 3; ++c) full.probs[static_cast<std::size_t>(c) * plane + i] /= sum;
  }

  const auto rects = sliding_windows(48, 48, 16, 8);
  std::vector<ProbabilityMap> patches;
  for (const auto& r : rects) {
    ProbabilityMap patch = ProbabilityMap::zeros(r.h, r.w, 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) patch.at(c, y, x) = full.at(c, r.y + y, r.x + x);
    patches.push_back(std::move(patch));
  }
  const ProbabilityMap out = stitch(patches, rects, 48, 48);
  for (std::size_t i = 0; i < full.probs.size(); ++i)
    CHECK(out.probs[i] == doctest::Approx(full.probs[i]).epsilon(1e-9));
}

TEST_CASE("stitch: uncovered pixels are rejected") {
  std::vector<WindowRect> rects{{0, 0, 8, 8}};
  std::vector<ProbabilityMap> patches{ProbabilityMap::zeros(8, 8, 2)};
  CHECK_THROWS_WITH_AS(stitch(patches, rects, 16, 16), doctest::Contains("not covered"),
                       std::invalid_argument);
}

TEST_CASE("manifest round trip and dataset loading") {
  const fs::path dir = fs::temp_directory_path() / "dtu_data_test";
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  SyntheticSpec spec;
  spec.num_images = 2;
  spec.num_classes = 2;
  Rng rng(13);
  const auto samples = generate_synthetic(spec, rng);
  DatasetManifest manifest;
  manifest.num_classes = 2;
  manifest.image_channels = 1;
  manifest.class_kind = {ClassKind::kCurvilinear, ClassKind::kCurvilinear};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string image_rel = "images/" + std::to_string(i) + ".png";
    const std::string mask_rel = "masks/" + std::to_string(i) + ".png";
    save_image(samples[i].image, (dir / image_rel).string());
    save_mask(samples[i].mask, (dir / mask_rel).string());
    manifest.items.push_back({image_rel, mask_rel});
  }
  save_manifest(manifest, (dir / "manifest.json").string());

  const DatasetManifest loaded = load_manifest((dir / "manifest.json").string());
  CHECK(loaded.num_classes == 2);
  CHECK(loaded.class_kind == manifest.class_kind);
  const auto set = load_dataset(loaded);
  REQUIRE(set.size() == 2);
  CHECK(set[0].mask.labels == samples[0].mask.labels);
}

TEST_CASE("load_drive: empty directory lists all 40 expected files") {
  const fs::path dir = fs::temp_directory_path() / "dtu_drive_empty";
  fs::create_directories(dir);
  try {
    load_drive(dir.string());
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("40 expected file(s) missing") != std::string::npos);
    CHECK(msg.find("21_training.png") != std::string::npos);
    CHECK(msg.find("40_manual1.png") != std::string::npos);
  }
}

TEST_CASE("load_drive: standard layout gives 16/4 split with binary masks") {
  const fs::path root = fs::temp_directory_path() / "dtu_drive_fake";
  fs::create_directories(root / "training" / "images");
  fs::create_directories(root / "training" / "1st_manual");
  for (int i = 21; i <= 40; ++i) {
    png::Image8 img;
    img.height = 32;
    img.width = 48;
    img.channels = 1;
    img.data.assign(32 * 48, static_cast<std::uint8_t>(i));
    png::write(img, (root / "training" / "images" / (std::to_string(i) + "_training.png")).string());
    png::Image8 manual = img;
    for (std::size_t j = 0; j < manual.data.size(); ++j)
      manual.data[j] = j % 5 == 0 ? 255 : 0;
    png::write(manual,
               (root / "training" / "1st_manual" / (std::to_string(i) + "_manual1.png")).string());
  }
  const DriveSet set = load_drive(root.string());
  CHECK(set.train.size() == 16);
  CHECK(set.test.size() == 4);
  for (const auto& s : set.train) {
    CHECK(s.mask.num_classes == 1);
    for (auto v : s.mask.labels) CHECK(v <= 1);
    CHECK(s.mask.class_kind[0] == ClassKind::kCurvilinear);
  }
  // sorted order: 21..36 train, 37..40 test
  CHECK(set.test[0].image.at(0, 0, 0) == doctest::Approx(37.0 / 255.0));
}
