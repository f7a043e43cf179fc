#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dtu/losses.hpp"
#include "dtu/rng.hpp"

using namespace dtu;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

FeatureEmbedding const_embedding(int c, int h, int w, double value) {
  FeatureEmbedding e;
  e.channels = c;
  e.height = h;
  e.width = w;
  e.stride = 8;
  e.features.assign(static_cast<std::size_t>(c) * h * w, value);
  return e;
}

FeatureEmbedding random_embedding(int c, int h, int w, Rng& rng) {
  FeatureEmbedding e = const_embedding(c, h, w, 0.0);
  for (auto& v : e.features) v = rng.uniform_range(-1.0, 1.0);
  return e;
}

ProbabilityMap uniform_map(int h, int w, int channels) {
  ProbabilityMap p = ProbabilityMap::zeros(h, w, channels);
  for (auto& v : p.probs) v = 1.0 / channels;
  return p;
}

}  // namespace

TEST_CASE("triplet loss: pos == neg gives exactly tau") {
  Rng rng(1);
  const FeatureEmbedding a = random_embedding(3, 4, 4, rng);
  const FeatureEmbedding p = random_embedding(3, 4, 4, rng);
  CHECK(triplet_loss(a, p, p, 0.1) == 0.1);
}

TEST_CASE("triplet loss: arithmetic d+=0.5, d-=0.3, tau=0.1 -> 0.3") {
  // single channel, constant offsets: per-position distance equals |offset|
  const FeatureEmbedding a = const_embedding(1, 4, 4, 0.0);
  const FeatureEmbedding p = const_embedding(1, 4, 4, 0.5);
  const FeatureEmbedding n = const_embedding(1, 4, 4, -0.3);
  CHECK(triplet_loss(a, p, n, 0.1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("triplet loss: inactive hinge gives zero loss and zero gradients") {
  const FeatureEmbedding a = const_embedding(1, 4, 4, 0.0);
  const FeatureEmbedding p = const_embedding(1, 4, 4, 0.1);   // d+ = 0.1
  const FeatureEmbedding n = const_embedding(1, 4, 4, -0.9);  // d- = 0.9 >= d+ + tau
  CHECK(triplet_loss(a, p, n, 0.1) == 0.0);

  auto av = nn::make_var(embedding_to_tensor(a), true);
  auto pv = nn::make_var(embedding_to_tensor(p), true);
  auto nv = nn::make_var(embedding_to_tensor(n), true);
  auto loss = nn::triplet_loss(av, pv, nv, 0.1);
  nn::backward(loss);
  for (auto* v : {av.get(), pv.get(), nv.get()}) {
    v->ensure_grad();
    for (double g : v->grad.data) CHECK(g == 0.0);
  }
}

TEST_CASE("triplet loss: analytic gradient matches finite differences on 4x4") {
  Rng rng(2);
  auto a = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);
  auto p = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);
  auto n = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);

  auto loss = nn::triplet_loss(a, p, n, 0.5);  // margin large enough to stay active
  REQUIRE(loss->value.scalar() > 0.0);
  nn::backward(loss);

  const double h = 1e-6;
  for (auto& var : {a, p, n}) {
    for (std::size_t i = 0; i < var->value.data.size(); i += 7) {
      const double saved = var->value.data[i];
      var->value.data[i] = saved + h;
      const double f1 = nn::triplet_loss(a, p, n, 0.5)->value.scalar();
      var->value.data[i] = saved - h;
      const double f2 = nn::triplet_loss(a, p, n, 0.5)->value.scalar();
      var->value.data[i] = saved;
      const double fd = (f1 - f2) / (2.0 * h);
      const double an = var->grad.data[i];
      CHECK(std::abs(fd - an) / std::max(1.0, std::abs(fd)) < 1e-3);
      CHECK(std::abs(fd - an) / std::max(1.0, std::abs(fd)) < 1e-7);  // double precision
    }
  }
}

TEST_CASE("triplet loss is invariant under simultaneous spatial permutation") {
  Rng rng(3);
  const int c = 2, hh = 3, ww = 4;
  FeatureEmbedding a = random_embedding(c, hh, ww, rng);
  FeatureEmbedding p = random_embedding(c, hh, ww, rng);
  FeatureEmbedding n = random_embedding(c, hh, ww, rng);
  const double base = triplet_loss(a, p, n, 0.1);

  std::vector<int> perm(hh * ww);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  auto permute = [&](const FeatureEmbedding& e) {
    FeatureEmbedding out = e;
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < hh * ww; ++i)
        out.features[static_cast<std::size_t>(ch * hh * ww + i)] =
            e.features[static_cast<std::size_t>(ch * hh * ww + perm[static_cast<std::size_t>(i)])];
    return out;
  };
  const double permuted = triplet_loss(permute(a), permute(p), permute(n), 0.1);
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("focal loss: perfect prediction is ~0, gamma=0 reduces to cross-entropy") {
  SegmentationMask target = SegmentationMask::zeros(4, 4, 2);
  target.set(1, 1, 1);
  target.set(2, 3, 2);
  const ProbabilityMap perfect = one_hot(target);
  CHECK(focal_loss(perfect, target, 2.0, 0.25) < 1e-10);

  // gamma=0, alpha=1: direct mean cross-entropy oracle
  Rng rng(4);
  ProbabilityMap pred = ProbabilityMap::zeros(4, 4, 3);
  const std::size_t plane = 16;
  for (std::size_t i = 0; i < plane; ++i) {
    double raw[3], sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += raw[c] = rng.uniform() + 0.1;
    for (int c = 0; c < 3; ++c) pred.probs[static_cast<std::size_t>(c) * plane + i] = raw[c] / sum;
  }
  double ce = 0.0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ce -= std::log(pred.at(target.at(y, x), y, x));
  ce /= 16.0;
  CHECK(focal_loss(pred, target, 0.0, 1.0) == doctest::Approx(ce).epsilon(1e-12));
}

TEST_CASE("focal loss: uniform binary prediction closed form") {
  SegmentationMask target = SegmentationMask::zeros(4, 4, 1);
  for (int x = 0; x < 4; ++x) target.set(0, x, 1);
  const ProbabilityMap uniform = uniform_map(4, 4, 2);
  const double expected = -0.25 * std::pow(0.5, 2.0) * std::log(0.5);
  CHECK(focal_loss(uniform, target, 2.0, 0.25) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("soft dice loss: identity, all-background, half-overlap") {
  SegmentationMask target = SegmentationMask::zeros(8, 8, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) target.set(y, x, 1);

  CHECK(soft_dice_loss(one_hot(target), target) < 1e-6);

  ProbabilityMap all_bg = ProbabilityMap::zeros(8, 8, 2);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) all_bg.at(0, y, x) = 1.0;
  CHECK(soft_dice_loss(all_bg, target) == doctest::Approx(1.0).epsilon(1e-4));

  // equal-area strips overlapping on half their area: dice = 0.5
  SegmentationMask shifted = SegmentationMask::zeros(8, 8, 1);
  for (int y = 2; y < 6; ++y)
    for (int x = 0; x < 8; ++x) shifted.set(y, x, 1);
  CHECK(soft_dice_loss(one_hot(shifted), target) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("bce loss on the topology map") {
  SegmentationMask target = SegmentationMask::zeros(4, 4, 1);
  target.set(0, 0, 1);
  ProbabilityMap p = ProbabilityMap::zeros(4, 4, 1);
  for (auto& v : p.probs) v = 0.5;
  CHECK(bce_loss(p, target) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("clDice+focal: alpha=0 equals focal exactly") {
  Rng rng(5);
  SegmentationMask target = SegmentationMask::zeros(8, 8, 1);
  for (int x = 1; x < 7; ++x) target.set(4, x, 1);
  ProbabilityMap pred = uniform_map(8, 8, 2);
  const double focal = focal_loss(pred, target, 2.0, 0.25);
  CHECK(cl_dice_focal_loss(pred, target, 0.0, 2.0, 5) == doctest::Approx(focal).epsilon(1e-12));
}

TEST_CASE("clDice+focal: perfect thin-curve prediction has ~zero topology term") {
  SegmentationMask target = SegmentationMask::zeros(12, 12, 1);
  for (int x = 1; x < 11; ++x) target.set(6, x, 1);
  const ProbabilityMap perfect = one_hot(target);
  // alpha=1 isolates the clDice term; a 1-px curve is its own skeleton
  CHECK(cl_dice_focal_loss(perfect, target, 1.0, 2.0, 5) < 1e-3);
}

TEST_CASE("clDice+focal: alpha=1, disjoint skeletons give ~1") {
  SegmentationMask target = SegmentationMask::zeros(16, 16, 1);
  for (int x = 1; x < 15; ++x) target.set(2, x, 1);
  SegmentationMask far_off = SegmentationMask::zeros(16, 16, 1);
  for (int x = 1; x < 15; ++x) far_off.set(12, x, 1);
  const ProbabilityMap pred = one_hot(far_off);

  // oracle: with disjoint supports, tprec ~ eps/|skel|, tsens ~ eps/|skel|,
  // so clDice ~ 0 and the loss approaches 1
  const double loss = cl_dice_focal_loss(pred, target, 1.0, 2.0, 5);
  CHECK(loss == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("unified loss: perfect predictions with pos=neg leave only the tau floor") {
  SegmentationMask gt = SegmentationMask::zeros(8, 8, 2);
  for (int x = 0; x < 8; ++x) gt.set(3, x, 1);
  gt.set(6, 6, 2);

  const ProbabilityMap p_tex = one_hot(gt);
  const ProbabilityMap p_top = [&] {
    ProbabilityMap p = ProbabilityMap::zeros(8, 8, 1);
    const SegmentationMask b = binarize_mask(gt);
    for (std::size_t i = 0; i < b.labels.size(); ++i) p.probs[i] = b.labels[i];
    return p;
  }();
  Rng rng(6);
  const FeatureEmbedding anchor = random_embedding(4, 2, 2, rng);
  const FeatureEmbedding pos = random_embedding(4, 2, 2, rng);

  LossConfig cfg;
  const LossBreakdown out = unified_loss(p_tex, p_top, anchor, pos, pos, gt, cfg);
  CHECK(out.l_tri == cfg.tau);
  CHECK(out.l_tex < 1e-6);
  CHECK(out.l_bce < 1e-5);
  CHECK(out.total == doctest::Approx(cfg.tau).epsilon(1e-4));
  CHECK(out.total >= out.l_tex);
  CHECK(out.total >= out.l_bce);
  CHECK(out.total >= out.l_tri);
}

TEST_CASE("unified loss: gradient matches finite differences on a 4x4 toy") {
  Rng rng(7);
  SegmentationMask gt = SegmentationMask::zeros(4, 4, 2);
  gt.set(1, 1, 1);
  gt.set(2, 2, 2);
  gt.set(3, 0, 1);

  // free simplex-ish inputs away from clamps and the hinge kink
  Tensor<double> ptex_t(Shape{1, 3, 4, 4});
  for (auto& v : ptex_t.data) v = rng.uniform_range(0.15, 0.6);
  Tensor<double> ptop_t(Shape{1, 1, 4, 4});
  for (auto& v : ptop_t.data) v = rng.uniform_range(0.2, 0.8);
  auto ptex = nn::make_var(ptex_t, true);
  auto ptop = nn::make_var(ptop_t, true);
  auto a = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);
  auto p = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);
  auto n = nn::make_var(embedding_to_tensor(random_embedding(3, 4, 4, rng)), true);

  LossConfig cfg;
  cfg.tau = 0.5;  // keep the hinge active for nonzero triplet gradients
  const auto labels = mask_to_labels(gt);
  const auto onehot = mask_to_one_hot64(gt, 3);
  const auto binary = mask_to_binary64(gt);
  auto build = [&] {
    return unified_loss_graph(ptex, ptop, a, p, n, labels, onehot, binary, cfg).total;
  };

  auto loss = build();
  REQUIRE(loss->value.scalar() > 0.0);
  nn::backward(loss);

  const double h = 1e-6;
  for (auto& var : {ptex, ptop, a, p, n}) {
    for (std::size_t i = 0; i < var->value.data.size(); i += 5) {
      const double saved = var->value.data[i];
      var->value.data[i] = saved + h;
      const double f1 = build()->value.scalar();
      var->value.data[i] = saved - h;
      const double f2 = build()->value.scalar();
      var->value.data[i] = saved;
      const double fd = (f1 - f2) / (2.0 * h);
      const double an = var->grad.data[i];
      CHECK(std::abs(fd - an) / std::max(1.0, std::abs(fd)) < 1e-3);
    }
  }
}

TEST_CASE("losses stay finite on extreme inputs") {
  SegmentationMask gt = SegmentationMask::zeros(4, 4, 1);
  gt.set(0, 0, 1);
  ProbabilityMap hard = ProbabilityMap::zeros(4, 4, 2);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) hard.at(0, y, x) = 1.0;  // confident and wrong at (0,0)
  CHECK(std::isfinite(focal_loss(hard, gt, 2.0, 0.25)));
  CHECK(std::isfinite(soft_dice_loss(hard, gt)));

  ProbabilityMap top = ProbabilityMap::zeros(4, 4, 1);  // exact zeros against label 1
  CHECK(std::isfinite(bce_loss(top, gt)));
}

TEST_CASE("LossConfig validation") {
  LossConfig bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = LossConfig{};
  bad.cldice_alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
