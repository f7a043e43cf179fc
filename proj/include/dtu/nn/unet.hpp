#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dtu/nn/autograd.hpp"
#include "dtu/rng.hpp"

namespace dtu::nn {

template <class T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <class T>
using ParamList = std::vector<NamedParam<T>>;

template <class T>
Var<T> new_param(Shape shape) {
  auto v = make_var<T>(Tensor<T>(shape), true);
  return v;
}

// He-normal initialization in double, cast to the working precision.
template <class T>
void he_init(Var<T>& v, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& x : v->value.data) x = static_cast<T>(rng.normal() * stddev);
}

template <class T>
struct Conv2d {
  Var<T> weight;  // (out, in, k, k)
  Var<T> bias;    // (1, out, 1, 1)

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int k, Rng& rng) {
    weight = new_param<T>({out_ch, in_ch, k, k});
    bias = new_param<T>({1, out_ch, 1, 1});
    he_init(weight, in_ch * k * k, rng);
  }
  Var<T> operator()(Var<T> x) const { return conv2d(x, weight, bias); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <class T>
struct InstanceNorm {
  Var<T> gamma;
  Var<T> beta;

  InstanceNorm() = default;
  explicit InstanceNorm(int channels) {
    gamma = new_param<T>({1, channels, 1, 1});
    beta = new_param<T>({1, channels, 1, 1});
    for (auto& v : gamma->value.data) v = T{1};
  }
  Var<T> operator()(Var<T> x) const { return instance_norm(x, gamma, beta); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
  }
};

template <class T>
struct Linear {
  Var<T> weight;  // (out, in, 1, 1)
  Var<T> bias;    // (1, out, 1, 1)

  Linear() = default;
  Linear(int in_ch, int out_ch, Rng& rng) {
    weight = new_param<T>({out_ch, in_ch, 1, 1});
    bias = new_param<T>({1, out_ch, 1, 1});
    he_init(weight, in_ch, rng);
  }
  Var<T> operator()(Var<T> x) const { return linear(x, weight, bias); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

// conv3x3 -> norm -> relu, twice
template <class T>
struct ConvBlock {
  Conv2d<T> conv1, conv2;
  InstanceNorm<T> norm1, norm2;

  ConvBlock() = default;
  ConvBlock(int in_ch, int out_ch, Rng& rng)
      : conv1(in_ch, out_ch, 3, rng),
        conv2(out_ch, out_ch, 3, rng),
        norm1(out_ch),
        norm2(out_ch) {}
  Var<T> operator()(Var<T> x) const {
    return relu(norm2(conv2(relu(norm1(conv1(x))))));
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    conv1.collect(out, prefix + ".conv1");
    norm1.collect(out, prefix + ".norm1");
    conv2.collect(out, prefix + ".conv2");
    norm2.collect(out, prefix + ".norm2");
  }
};

// Squeeze-and-excitation: global average -> MLP -> sigmoid -> channel scale.
template <class T>
struct SEBlock {
  Linear<T> fc1, fc2;

  SEBlock() = default;
  SEBlock(int channels, int reduction, Rng& rng)
      : fc1(channels, std::max(1, channels / reduction), rng),
        fc2(std::max(1, channels / reduction), channels, rng) {}
  Var<T> operator()(Var<T> x) const {
    auto scores = sigmoid(fc2(relu(fc1(global_avg_pool(x)))));
    return scale_channels(x, scores);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
  }
};

// Contracting path: depth blocks with 2x2 max-pool between, then bottleneck.
template <class T>
struct Encoder {
  std::vector<ConvBlock<T>> blocks;
  ConvBlock<T> bottleneck;

  struct Out {
    std::vector<Var<T>> skips;  // one per level, full-to-coarse
    Var<T> bottom;
  };

  Encoder() = default;
  Encoder(int in_ch, int base, int depth, Rng& rng) {
    int ch = in_ch;
    for (int l = 0; l < depth; ++l) {
      blocks.emplace_back(ch, base << l, rng);
      ch = base << l;
    }
    bottleneck = ConvBlock<T>(ch, base << depth, rng);
  }

  Out forward(Var<T> x) const {
    Out out;
    for (const auto& block : blocks) {
      x = block(x);
      out.skips.push_back(x);
      x = maxpool2(x);
    }
    out.bottom = bottleneck(x);
    return out;
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < blocks.size(); ++l)
      blocks[l].collect(out, prefix + ".down" + std::to_string(l));
    bottleneck.collect(out, prefix + ".bottleneck");
  }
};

// Expanding path: bilinear upsample + skip concat + block per level, then a
// 1x1 head producing logits.
template <class T>
struct Decoder {
  std::vector<ConvBlock<T>> blocks;  // coarse-to-full
  Conv2d<T> head;

  Decoder() = default;
  Decoder(int base, int depth, int out_ch, Rng& rng) {
    for (int l = depth - 1; l >= 0; --l)
      blocks.emplace_back((base << (l + 1)) + (base << l), base << l, rng);
    head = Conv2d<T>(base, out_ch, 1, rng);
  }

  Var<T> forward(Var<T> bottom, const std::vector<Var<T>>& skips) const {
    if (skips.size() != blocks.size())
      throw std::invalid_argument("Decoder: skip count mismatch");
    Var<T> x = bottom;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const Var<T>& skip = skips[skips.size() - 1 - i];
      Var<T> up = upsample_bilinear2(x);
      if (up->value.shape.h != skip->value.shape.h ||
          up->value.shape.w != skip->value.shape.w)
        throw std::invalid_argument("Decoder: skip shape mismatch");
      x = blocks[i](concat_channels(up, skip));
    }
    return head(x);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < blocks.size(); ++l)
      blocks[l].collect(out, prefix + ".up" + std::to_string(l));
    head.collect(out, prefix + ".head");
  }
};

// Reduced-depth U-Net; the softmax/sigmoid head activation is applied by the
// caller so logits stay available.
template <class T>
struct MiniUNet {
  Encoder<T> encoder;
  Decoder<T> decoder;

  MiniUNet() = default;
  MiniUNet(int in_ch, int out_ch, int base, int depth, Rng& rng)
      : encoder(in_ch, base, depth, rng), decoder(base, depth, out_ch, rng) {}

  Var<T> forward(Var<T> x) const {
    const auto enc = encoder.forward(x);
    return decoder.forward(enc.bottom, enc.skips);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    encoder.collect(out, prefix + ".enc");
    decoder.collect(out, prefix + ".dec");
  }
};

}  // namespace dtu::nn
