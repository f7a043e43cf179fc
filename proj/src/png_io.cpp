#include "dtu/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace dtu::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image8 read(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG for reading: " + path);

  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw std::runtime_error("png_create_read_struct failed");
  png_infop info_ptr = png_create_info_struct(png_ptr);
  if (!info_ptr) {
    png_destroy_read_struct(&png_ptr, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    throw std::runtime_error("libpng error while reading: " + path);
  }

  png_init_io(png_ptr, fp.get());
  png_read_info(png_ptr, info_ptr);

  const png_uint_32 w = png_get_image_width(png_ptr, info_ptr);
  const png_uint_32 h = png_get_image_height(png_ptr, info_ptr);
  const int bit_depth = png_get_bit_depth(png_ptr, info_ptr);
  const int color_type = png_get_color_type(png_ptr, info_ptr);

  if (bit_depth == 16) png_set_strip_16(png_ptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_ptr);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png_ptr);
  if (png_get_valid(png_ptr, info_ptr, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png_ptr);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png_ptr);
  png_read_update_info(png_ptr, info_ptr);

  const int out_channels = static_cast<int>(png_get_channels(png_ptr, info_ptr));
  if (out_channels != 1 && out_channels != 3) {
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    throw std::runtime_error("unsupported PNG channel count in " + path);
  }

  Image8 img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.channels = out_channels;
  img.data.resize(static_cast<std::size_t>(h) * w * static_cast<std::size_t>(out_channels));

  std::vector<png_bytep> rows(h);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * static_cast<std::size_t>(out_channels);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + y * row_bytes;
  png_read_image(png_ptr, rows.data());
  png_read_end(png_ptr, nullptr);
  png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
  return img;
}

void write(const Image8& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("png::write expects 1 or 3 channels");
  if (image.data.size() != static_cast<std::size_t>(image.height) * image.width * image.channels)
    throw std::invalid_argument("png::write: data size does not match dims");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open PNG for writing: " + path);

  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw std::runtime_error("png_create_write_struct failed");
  png_infop info_ptr = png_create_info_struct(png_ptr);
  if (!info_ptr) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_write_struct(&png_ptr, &info_ptr);
    throw std::runtime_error("libpng error while writing: " + path);
  }

  png_init_io(png_ptr, fp.get());
  png_set_IHDR(png_ptr, info_ptr, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png_ptr, info_ptr);

  const std::size_t row_bytes =
      static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.channels);
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(y) * row_bytes);
  png_write_image(png_ptr, rows.data());
  png_write_end(png_ptr, nullptr);
  png_destroy_write_struct(&png_ptr, &info_ptr);
}

}  // namespace dtu::png
