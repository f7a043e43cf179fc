#include "dtu/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dtu {

namespace {
constexpr char kMagic[8] = {'D', 'T', 'U', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json manifest;
  manifest["format"] = 1;
  manifest["model"] = {{"depth", ckpt.spec.depth},
                       {"base_channels", ckpt.spec.base_channels},
                       {"image_channels", ckpt.spec.image_channels},
                       {"num_classes", ckpt.spec.num_classes},
                       {"se_reduction", ckpt.spec.se_reduction},
                       {"init_seed", ckpt.spec.init_seed}};
  manifest["epoch"] = ckpt.epoch;
  manifest["lambda"] = ckpt.lambda;
  manifest["adam_step"] = ckpt.adam_step;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.arrays) {
    arrays.push_back({{"name", name},
                      {"shape", {tensor.shape.n, tensor.shape.c, tensor.shape.h, tensor.shape.w}},
                      {"dtype", "f32"}});
  }
  manifest["arrays"] = arrays;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, tensor] : ckpt.arrays)
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a DTU checkpoint: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint manifest: " + path);

  const nlohmann::json manifest = nlohmann::json::parse(text);
  Checkpoint ckpt;
  const auto& model = manifest.at("model");
  ckpt.spec.depth = model.at("depth").get<int>();
  ckpt.spec.base_channels = model.at("base_channels").get<int>();
  ckpt.spec.image_channels = model.at("image_channels").get<int>();
  ckpt.spec.num_classes = model.at("num_classes").get<int>();
  ckpt.spec.se_reduction = model.at("se_reduction").get<int>();
  ckpt.spec.init_seed = model.at("init_seed").get<std::uint64_t>();
  ckpt.epoch = manifest.at("epoch").get<int>();
  ckpt.lambda = manifest.at("lambda").get<double>();
  ckpt.adam_step = manifest.value("adam_step", 0LL);

  for (const auto& entry : manifest.at("arrays")) {
    const auto shape = entry.at("shape");
    nn::Tensor<float> tensor(nn::Shape{shape[0].get<int>(), shape[1].get<int>(),
                                       shape[2].get<int>(), shape[3].get<int>()});
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    ckpt.arrays.emplace(entry.at("name").get<std::string>(), std::move(tensor));
  }
  return ckpt;
}

}  // namespace dtu
