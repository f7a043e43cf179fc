#pragma once

#include <map>
#include <string>

#include "dtu/model.hpp"
#include "dtu/nn/tensor.hpp"

namespace dtu {

// Single-file checkpoint: magic, JSON manifest (spec, epoch, lambda, array
// directory), then raw little-endian float32 payloads. Bit-exact round trip.
struct Checkpoint {
  ModelSpec spec;
  int epoch = 0;
  double lambda = 0.0;
  long long adam_step = 0;
  std::map<std::string, nn::Tensor<float>> arrays;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dtu
