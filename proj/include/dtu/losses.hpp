#pragma once

#include <cstdint>

#include "dtu/core.hpp"
#include "dtu/nn/loss_ops.hpp"

namespace dtu {

struct LossConfig {
  double tau = 0.1;            // triplet margin
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_weight = 0.5;    // L_tex = dice_weight * soft_dice + focal_weight * focal
  double focal_weight = 0.5;
  double cldice_alpha = 0.2;   // 0.2 multi-class, 0.5 binary
  double cldice_beta = 0.0;    // softDice mixture variant
  int skeleton_iters = 10;
  // Unit multipliers on the three unified-loss terms; the sum is unweighted
  // by default, the knobs exist for ablations (triplet_weight = 0 drops L_tri).
  double tex_weight = 1.0;
  double bce_weight = 1.0;
  double triplet_weight = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double l_tex = 0.0;
  double l_bce = 0.0;
  double l_tri = 0.0;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// Graph builders (shared by the float training path and double FD checks)
// ---------------------------------------------------------------------------

template <class T>
struct UnifiedLossVars {
  nn::Var<T> l_tex;
  nn::Var<T> l_bce;
  nn::Var<T> l_tri;
  nn::Var<T> total;
};

// L_DTU = L_tex(p_tex, G) + L_BCE(p_top, binarized G) + L_tri(anchor, pos, neg)
template <class T>
UnifiedLossVars<T> unified_loss_graph(nn::Var<T> p_tex, nn::Var<T> p_top, nn::Var<T> anchor,
                                      nn::Var<T> pos, nn::Var<T> neg,
                                      const nn::Tensor<std::int32_t>& labels,
                                      const nn::Tensor<T>& one_hot_gt,
                                      const nn::Tensor<T>& binarized_gt,
                                      const LossConfig& cfg) {
  UnifiedLossVars<T> out;
  auto dice = nn::soft_dice_loss(p_tex, one_hot_gt);
  auto focal = nn::focal_loss(p_tex, labels, cfg.focal_gamma, cfg.focal_alpha);
  out.l_tex = nn::add(nn::mul_const(dice, cfg.dice_weight), nn::mul_const(focal, cfg.focal_weight));
  out.l_bce = nn::bce_loss(p_top, binarized_gt);
  out.l_tri = nn::triplet_loss(anchor, pos, neg, cfg.tau);
  out.total = nn::add(nn::add(nn::mul_const(out.l_tex, cfg.tex_weight),
                              nn::mul_const(out.l_bce, cfg.bce_weight)),
                      nn::mul_const(out.l_tri, cfg.triplet_weight));
  return out;
}

// alpha (1 - clDice) + (1 - alpha) L_focal; clDice runs on the aggregated
// foreground probability (1 - background channel).
template <class T>
nn::Var<T> cl_dice_focal_graph(nn::Var<T> probs, const nn::Tensor<std::int32_t>& labels,
                               const nn::Tensor<T>& binarized_gt, double alpha, double gamma,
                               double focal_alpha, int skeleton_iters) {
  auto fg = nn::add_const(nn::mul_const(nn::slice_channels(probs, 0, 1), -1.0), 1.0);
  auto target = nn::make_var<T>(binarized_gt);
  auto cld = nn::cl_dice(fg, target, skeleton_iters);
  auto topo_term = nn::add_const(nn::mul_const(cld, -1.0), 1.0);  // 1 - clDice
  auto focal = nn::focal_loss(probs, labels, gamma, focal_alpha);
  return nn::add(nn::mul_const(topo_term, alpha), nn::mul_const(focal, 1.0 - alpha));
}

// beta (1 - clDice) + (1 - beta)(1 - softDice); the mixture the clDice paper
// proposed, kept for documenting its non-convergent configurations.
template <class T>
nn::Var<T> cl_dice_soft_dice_graph(nn::Var<T> probs, const nn::Tensor<T>& one_hot_gt,
                                   const nn::Tensor<T>& binarized_gt, double beta,
                                   int skeleton_iters) {
  auto fg = nn::add_const(nn::mul_const(nn::slice_channels(probs, 0, 1), -1.0), 1.0);
  auto target = nn::make_var<T>(binarized_gt);
  auto cld = nn::cl_dice(fg, target, skeleton_iters);
  auto topo_term = nn::add_const(nn::mul_const(cld, -1.0), 1.0);
  auto dice = nn::soft_dice_loss(probs, one_hot_gt);
  return nn::add(nn::mul_const(topo_term, beta), nn::mul_const(dice, 1.0 - beta));
}

// ---------------------------------------------------------------------------
// Domain-facing scalar evaluations
// ---------------------------------------------------------------------------

double triplet_loss(const FeatureEmbedding& anchor, const FeatureEmbedding& positive,
                    const FeatureEmbedding& negative, double tau);
double focal_loss(const ProbabilityMap& pred, const SegmentationMask& target, double gamma,
                  double alpha);
double soft_dice_loss(const ProbabilityMap& pred, const SegmentationMask& target);
double bce_loss(const ProbabilityMap& p_top, const SegmentationMask& binary_target);
double cl_dice_focal_loss(const ProbabilityMap& pred, const SegmentationMask& target,
                          double alpha, double gamma, int skeleton_iters,
                          double focal_alpha = 0.25);
LossBreakdown unified_loss(const ProbabilityMap& p_tex, const ProbabilityMap& p_top,
                           const FeatureEmbedding& anchor, const FeatureEmbedding& positive,
                           const FeatureEmbedding& negative, const SegmentationMask& gt,
                           const LossConfig& cfg);

// Conversion helpers shared with tests.
nn::Tensor<double> embedding_to_tensor(const FeatureEmbedding& emb);
nn::Tensor<double> probmap_to_tensor64(const ProbabilityMap& map);
nn::Tensor<std::int32_t> mask_to_labels(const SegmentationMask& mask);
nn::Tensor<double> mask_to_one_hot64(const SegmentationMask& mask, int channels);
nn::Tensor<double> mask_to_binary64(const SegmentationMask& mask);

}  // namespace dtu
