#include "dtu/losses.hpp"

#include <stdexcept>

namespace dtu {

void LossConfig::validate() const {
  if (tau <= 0.0) throw std::invalid_argument("LossConfig: tau must be positive");
  if (dice_weight < 0.0 || focal_weight < 0.0 || tex_weight < 0.0 || bce_weight < 0.0 ||
      triplet_weight < 0.0)
    throw std::invalid_argument("LossConfig: weights must be nonnegative");
  if (cldice_alpha < 0.0 || cldice_alpha > 1.0 || cldice_beta < 0.0 || cldice_beta > 1.0)
    throw std::invalid_argument("LossConfig: clDice mixing weights must be in [0,1]");
  if (skeleton_iters < 1) throw std::invalid_argument("LossConfig: skeleton_iters must be >= 1");
}

nn::Tensor<double> embedding_to_tensor(const FeatureEmbedding& emb) {
  nn::Tensor<double> t(nn::Shape{1, emb.channels, emb.height, emb.width});
  t.data = emb.features;
  return t;
}

nn::Tensor<double> probmap_to_tensor64(const ProbabilityMap& map) {
  nn::Tensor<double> t(nn::Shape{1, map.channels, map.height, map.width});
  t.data = map.probs;
  return t;
}

nn::Tensor<std::int32_t> mask_to_labels(const SegmentationMask& mask) {
  nn::Tensor<std::int32_t> t(nn::Shape{1, 1, mask.height, mask.width});
  for (std::size_t i = 0; i < mask.labels.size(); ++i) t.data[i] = mask.labels[i];
  return t;
}

nn::Tensor<double> mask_to_one_hot64(const SegmentationMask& mask, int channels) {
  nn::Tensor<double> t(nn::Shape{1, channels, mask.height, mask.width});
  const std::size_t plane = static_cast<std::size_t>(mask.height) * mask.width;
  for (std::size_t i = 0; i < plane; ++i) {
    if (mask.labels[i] >= channels)
      throw std::invalid_argument("mask_to_one_hot64: label exceeds channels");
    t.data[static_cast<std::size_t>(mask.labels[i]) * plane + i] = 1.0;
  }
  return t;
}

nn::Tensor<double> mask_to_binary64(const SegmentationMask& mask) {
  nn::Tensor<double> t(nn::Shape{1, 1, mask.height, mask.width});
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    t.data[i] = mask.labels[i] > 0 ? 1.0 : 0.0;
  return t;
}

double triplet_loss(const FeatureEmbedding& anchor, const FeatureEmbedding& positive,
                    const FeatureEmbedding& negative, double tau) {
  auto a = nn::make_var(embedding_to_tensor(anchor));
  auto p = nn::make_var(embedding_to_tensor(positive));
  auto n = nn::make_var(embedding_to_tensor(negative));
  return nn::triplet_loss(a, p, n, tau)->value.scalar();
}

double focal_loss(const ProbabilityMap& pred, const SegmentationMask& target, double gamma,
                  double alpha) {
  if (pred.height != target.height || pred.width != target.width)
    throw std::invalid_argument("focal_loss: shape mismatch");
  auto p = nn::make_var(probmap_to_tensor64(pred));
  return nn::focal_loss(p, mask_to_labels(target), gamma, alpha)->value.scalar();
}

double soft_dice_loss(const ProbabilityMap& pred, const SegmentationMask& target) {
  if (pred.height != target.height || pred.width != target.width)
    throw std::invalid_argument("soft_dice_loss: shape mismatch");
  auto p = nn::make_var(probmap_to_tensor64(pred));
  return nn::soft_dice_loss(p, mask_to_one_hot64(target, pred.channels))->value.scalar();
}

double bce_loss(const ProbabilityMap& p_top, const SegmentationMask& binary_target) {
  if (p_top.channels != 1) throw std::invalid_argument("bce_loss: expects 1-channel map");
  auto p = nn::make_var(probmap_to_tensor64(p_top));
  return nn::bce_loss(p, mask_to_binary64(binary_target))->value.scalar();
}

double cl_dice_focal_loss(const ProbabilityMap& pred, const SegmentationMask& target,
                          double alpha, double gamma, int skeleton_iters, double focal_alpha) {
  if (pred.height != target.height || pred.width != target.width)
    throw std::invalid_argument("cl_dice_focal_loss: shape mismatch");
  auto p = nn::make_var(probmap_to_tensor64(pred));
  return cl_dice_focal_graph(p, mask_to_labels(target), mask_to_binary64(target), alpha, gamma,
                             focal_alpha, skeleton_iters)
      ->value.scalar();
}

LossBreakdown unified_loss(const ProbabilityMap& p_tex, const ProbabilityMap& p_top,
                           const FeatureEmbedding& anchor, const FeatureEmbedding& positive,
                           const FeatureEmbedding& negative, const SegmentationMask& gt,
                           const LossConfig& cfg) {
  cfg.validate();
  auto ptex = nn::make_var(probmap_to_tensor64(p_tex));
  auto ptop = nn::make_var(probmap_to_tensor64(p_top));
  auto a = nn::make_var(embedding_to_tensor(anchor));
  auto p = nn::make_var(embedding_to_tensor(positive));
  auto n = nn::make_var(embedding_to_tensor(negative));
  const auto graph =
      unified_loss_graph(ptex, ptop, a, p, n, mask_to_labels(gt),
                         mask_to_one_hot64(gt, p_tex.channels), mask_to_binary64(gt), cfg);
  return {graph.l_tex->value.scalar(), graph.l_bce->value.scalar(),
          graph.l_tri->value.scalar(), graph.total->value.scalar()};
}

}  // namespace dtu
