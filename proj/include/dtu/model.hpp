#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "dtu/core.hpp"
#include "dtu/nn/adam.hpp"
#include "dtu/nn/unet.hpp"

namespace dtu {

struct ModelSpec {
  int depth = 3;
  int base_channels = 32;
  int image_channels = 1;
  int num_classes = 1;
  int se_reduction = 4;
  std::uint64_t init_seed = 0;

  void validate() const;
  int stride() const { return 1 << depth; }
};

// Texture net, topology encoder with SE-gated bottleneck, topology decoder.
// The type parameter selects the working precision: float for training,
// double for finite-difference verification.
template <class T>
struct DTUNetT {
  ModelSpec spec;
  nn::MiniUNet<T> texture;      // image -> c+1 logits (softmax applied here)
  nn::Encoder<T> topo_encoder;  // c+1 probabilities -> bottleneck features
  nn::SEBlock<T> se;
  nn::Decoder<T> topo_decoder;  // -> 1 logit (sigmoid applied here)

  DTUNetT() = default;
  explicit DTUNetT(const ModelSpec& s) : spec(s) {
    spec.validate();
    Rng rng(mix_seed(s.init_seed, 0x6d6f64656cULL));
    texture = nn::MiniUNet<T>(s.image_channels, s.num_classes + 1, s.base_channels, s.depth, rng);
    topo_encoder = nn::Encoder<T>(s.num_classes + 1, s.base_channels, s.depth, rng);
    se = nn::SEBlock<T>(s.base_channels << s.depth, s.se_reduction, rng);
    topo_decoder = nn::Decoder<T>(s.base_channels, s.depth, 1, rng);
  }

  // Shared embedding path: encoder bottleneck gated by the SE block.
  struct Encoded {
    nn::Var<T> embedding;
    std::vector<nn::Var<T>> skips;
  };
  Encoded encode(nn::Var<T> probs) const {
    auto enc = topo_encoder.forward(probs);
    return {se(enc.bottom), std::move(enc.skips)};
  }

  struct Forward {
    nn::Var<T> p_tex;   // (N, c+1, H, W) softmax
    nn::Var<T> p_top;   // (N, 1, H, W) sigmoid
    nn::Var<T> anchor;  // (N, k, H/2^d, W/2^d)
    nn::Var<T> pos;     // null outside training
    nn::Var<T> neg;     // null outside training
  };

  // Training mode threads the ground truth and its corrupted copy through
  // the shared encoder; inference only forwards the anchor path.
  Forward forward(nn::Var<T> images, nn::Var<T> one_hot_gt, nn::Var<T> one_hot_corrupted,
                  bool training) const {
    if (training && (!one_hot_gt || !one_hot_corrupted))
      throw std::invalid_argument("DTUNet: training mode requires G and corrupted G");
    Forward out;
    out.p_tex = nn::softmax_channels(texture.forward(images));
    auto anchor = encode(out.p_tex);
    out.anchor = anchor.embedding;
    out.p_top = nn::sigmoid(topo_decoder.forward(anchor.embedding, anchor.skips));
    if (training) {
      out.pos = encode(one_hot_gt).embedding;
      out.neg = encode(one_hot_corrupted).embedding;
    }
    return out;
  }

  nn::ParamList<T> parameters() const {
    nn::ParamList<T> out;
    texture.collect(out, "texture");
    topo_encoder.collect(out, "topo.enc");
    se.collect(out, "topo.se");
    topo_decoder.collect(out, "topo.dec");
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.var->value.shape.numel();
    return n;
  }
};

using DTUNet = DTUNetT<float>;

// Domain-facing wrapper: pads inputs to the U-Net stride, converts between
// domain types and tensors, and owns checkpoint round trips.
class DTUNetModel {
 public:
  explicit DTUNetModel(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  DTUNet& net() { return net_; }
  const DTUNet& net() const { return net_; }

  ProbabilityMap texture_forward(const InputImage& image) const;
  FeatureEmbedding topology_encode(const ProbabilityMap& probs) const;

  struct TopoForward {
    FeatureEmbedding embedding;
    ProbabilityMap p_top;  // single channel
  };
  TopoForward topology_forward(const ProbabilityMap& probs) const;

  struct ForwardResult {
    ProbabilityMap p_tex;
    ProbabilityMap p_top;
    FeatureEmbedding anchor;
    std::optional<FeatureEmbedding> positive;
    std::optional<FeatureEmbedding> negative;
  };
  ForwardResult dtu_forward(const InputImage& image, const SegmentationMask* gt,
                            const SegmentationMask* corrupted, bool training) const;

  struct Prediction {
    ProbabilityMap p_tex;
    ProbabilityMap p_top;
  };
  Prediction predict(const InputImage& image) const;

  void save(const std::string& path, int epoch = 0, double lambda = 0.0) const;
  static DTUNetModel load(const std::string& path);

 private:
  ModelSpec spec_;
  DTUNet net_;
};

// Tensor bridging helpers shared by the model wrapper and the trainer.
nn::Tensor<float> image_to_tensor(const InputImage& image, int pad_to_multiple);
nn::Tensor<float> probmap_to_tensor(const ProbabilityMap& map, int pad_to_multiple);
nn::Tensor<float> one_hot_tensor(const SegmentationMask& mask, int channels,
                                 int pad_to_multiple);
ProbabilityMap tensor_to_probmap(const nn::Tensor<float>& t, int n, int height, int width);
FeatureEmbedding tensor_to_embedding(const nn::Tensor<float>& t, int n, int stride);

}  // namespace dtu
