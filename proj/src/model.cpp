#include "dtu/model.hpp"

#include <stdexcept>

#include "dtu/checkpoint.hpp"

namespace dtu {

void ModelSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("ModelSpec: depth must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("ModelSpec: base_channels must be >= 1");
  if (image_channels != 1 && image_channels != 3)
    throw std::invalid_argument("ModelSpec: image_channels must be 1 or 3");
  if (num_classes < 1) throw std::invalid_argument("ModelSpec: num_classes must be >= 1");
  if (se_reduction < 1) throw std::invalid_argument("ModelSpec: se_reduction must be >= 1");
}

namespace {

int padded_dim(int dim, int multiple) {
  return (dim + multiple - 1) / multiple * multiple;
}

// bottom/right reflect padding index (no edge repeat)
int reflect_index(int i, int dim) { return i < dim ? i : 2 * dim - 2 - i; }

}  // namespace

nn::Tensor<float> image_to_tensor(const InputImage& image, int pad_to_multiple) {
  const int hp = padded_dim(image.height, pad_to_multiple);
  const int wp = padded_dim(image.width, pad_to_multiple);
  if (hp - image.height >= image.height || wp - image.width >= image.width)
    throw std::invalid_argument("image too small to pad to the network stride");
  nn::Tensor<float> out(nn::Shape{1, image.channels, hp, wp});
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < hp; ++y)
      for (int x = 0; x < wp; ++x)
        out(0, c, y, x) = static_cast<float>(
            image.at(c, reflect_index(y, image.height), reflect_index(x, image.width)));
  return out;
}

nn::Tensor<float> probmap_to_tensor(const ProbabilityMap& map, int pad_to_multiple) {
  const int hp = padded_dim(map.height, pad_to_multiple);
  const int wp = padded_dim(map.width, pad_to_multiple);
  nn::Tensor<float> out(nn::Shape{1, map.channels, hp, wp});
  for (int c = 0; c < map.channels; ++c)
    for (int y = 0; y < hp; ++y)
      for (int x = 0; x < wp; ++x)
        out(0, c, y, x) = static_cast<float>(
            map.at(c, reflect_index(y, map.height), reflect_index(x, map.width)));
  return out;
}

nn::Tensor<float> one_hot_tensor(const SegmentationMask& mask, int channels,
                                 int pad_to_multiple) {
  const int hp = padded_dim(mask.height, pad_to_multiple);
  const int wp = padded_dim(mask.width, pad_to_multiple);
  nn::Tensor<float> out(nn::Shape{1, channels, hp, wp});
  for (int y = 0; y < hp; ++y)
    for (int x = 0; x < wp; ++x) {
      const int label = mask.at(reflect_index(y, mask.height), reflect_index(x, mask.width));
      if (label >= channels) throw std::invalid_argument("one_hot_tensor: label exceeds channels");
      out(0, label, y, x) = 1.0f;
    }
  return out;
}

ProbabilityMap tensor_to_probmap(const nn::Tensor<float>& t, int n, int height, int width) {
  ProbabilityMap out = ProbabilityMap::zeros(height, width, t.shape.c);
  for (int c = 0; c < t.shape.c; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = static_cast<double>(t(n, c, y, x));
  return out;
}

FeatureEmbedding tensor_to_embedding(const nn::Tensor<float>& t, int n, int stride) {
  FeatureEmbedding emb;
  emb.height = t.shape.h;
  emb.width = t.shape.w;
  emb.channels = t.shape.c;
  emb.stride = stride;
  emb.features.resize(static_cast<std::size_t>(t.shape.c) * t.shape.h * t.shape.w);
  std::size_t i = 0;
  for (int c = 0; c < t.shape.c; ++c)
    for (int y = 0; y < t.shape.h; ++y)
      for (int x = 0; x < t.shape.w; ++x) emb.features[i++] = static_cast<double>(t(n, c, y, x));
  return emb;
}

DTUNetModel::DTUNetModel(const ModelSpec& spec) : spec_(spec), net_(spec) {}

ProbabilityMap DTUNetModel::texture_forward(const InputImage& image) const {
  if (image.channels != spec_.image_channels)
    throw std::invalid_argument("texture_forward: image channel count does not match spec");
  auto x = nn::make_var(image_to_tensor(image, spec_.stride()));
  auto probs = nn::softmax_channels(net_.texture.forward(x));
  return tensor_to_probmap(probs->value, 0, image.height, image.width);
}

FeatureEmbedding DTUNetModel::topology_encode(const ProbabilityMap& probs) const {
  if (probs.channels != spec_.num_classes + 1)
    throw std::invalid_argument("topology_encode: probability map channels must equal c+1");
  auto x = nn::make_var(probmap_to_tensor(probs, spec_.stride()));
  auto enc = net_.encode(x);
  return tensor_to_embedding(enc.embedding->value, 0, spec_.stride());
}

DTUNetModel::TopoForward DTUNetModel::topology_forward(const ProbabilityMap& probs) const {
  if (probs.channels != spec_.num_classes + 1)
    throw std::invalid_argument("topology_forward: probability map channels must equal c+1");
  auto x = nn::make_var(probmap_to_tensor(probs, spec_.stride()));
  auto enc = net_.encode(x);
  auto p_top = nn::sigmoid(net_.topo_decoder.forward(enc.embedding, enc.skips));
  return {tensor_to_embedding(enc.embedding->value, 0, spec_.stride()),
          tensor_to_probmap(p_top->value, 0, probs.height, probs.width)};
}

DTUNetModel::ForwardResult DTUNetModel::dtu_forward(const InputImage& image,
                                                    const SegmentationMask* gt,
                                                    const SegmentationMask* corrupted,
                                                    bool training) const {
  if (training && (gt == nullptr || corrupted == nullptr))
    throw std::invalid_argument("dtu_forward: training mode requires G and corrupted G");
  auto x = nn::make_var(image_to_tensor(image, spec_.stride()));
  nn::Var<float> g, ghat;
  if (training) {
    g = nn::make_var(one_hot_tensor(*gt, spec_.num_classes + 1, spec_.stride()));
    ghat = nn::make_var(one_hot_tensor(*corrupted, spec_.num_classes + 1, spec_.stride()));
  }
  const auto fwd = net_.forward(x, g, ghat, training);

  ForwardResult out;
  out.p_tex = tensor_to_probmap(fwd.p_tex->value, 0, image.height, image.width);
  out.p_top = tensor_to_probmap(fwd.p_top->value, 0, image.height, image.width);
  out.anchor = tensor_to_embedding(fwd.anchor->value, 0, spec_.stride());
  if (training) {
    out.positive = tensor_to_embedding(fwd.pos->value, 0, spec_.stride());
    out.negative = tensor_to_embedding(fwd.neg->value, 0, spec_.stride());
  }
  return out;
}

DTUNetModel::Prediction DTUNetModel::predict(const InputImage& image) const {
  const auto fwd = dtu_forward(image, nullptr, nullptr, false);
  return {fwd.p_tex, fwd.p_top};
}

void DTUNetModel::save(const std::string& path, int epoch, double lambda) const {
  Checkpoint ckpt;
  ckpt.spec = spec_;
  ckpt.epoch = epoch;
  ckpt.lambda = lambda;
  for (const auto& p : net_.parameters()) ckpt.arrays.emplace(p.name, p.var->value);
  save_checkpoint(ckpt, path);
}

DTUNetModel DTUNetModel::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  DTUNetModel model(ckpt.spec);
  for (auto& p : model.net_.parameters()) {
    const auto it = ckpt.arrays.find(p.name);
    if (it == ckpt.arrays.end())
      throw std::runtime_error("checkpoint missing parameter: " + p.name);
    if (!(it->second.shape == p.var->value.shape))
      throw std::runtime_error("checkpoint shape mismatch for: " + p.name);
    p.var->value = it->second;
  }
  return model;
}

}  // namespace dtu
