#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dtu::png {

struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 = gray, 3 = rgb
  std::vector<std::uint8_t> data;  // interleaved row-major
};

Image8 read(const std::string& path);
void write(const Image8& image, const std::string& path);

}  // namespace dtu::png
