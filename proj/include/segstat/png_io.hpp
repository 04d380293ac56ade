#pragma once

// Thin RAII-free wrapper over libpng's classic API. Decoding errors surface as
// InputError; libpng's longjmp never crosses a frame that owns C++ objects.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "segstat/error.hpp"
#include "segstat/image.hpp"

namespace segstat::png {

struct Pixels {
  Extent extent;
  int channels = 0;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;  // 8 or 16 after decoding
  std::vector<std::uint16_t> samples;  // interleaved, row-major

  std::uint16_t sample(std::size_t pixel, int channel) const {
    return samples[pixel * static_cast<std::size_t>(channels) + static_cast<std::size_t>(channel)];
  }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

struct ReadState {
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
};

inline bool decode(std::FILE* file, ReadState* state) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  state->width = png_get_image_width(png, info);
  state->height = png_get_image_height(png, info);
  state->channels = png_get_channels(png, info);
  state->bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  state->buffer.resize(row_bytes * state->height);
  state->rows.resize(state->height);
  for (png_uint_32 y = 0; y < state->height; ++y) state->rows[y] = state->buffer.data() + y * row_bytes;
  png_read_image(png, state->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct WriteRequest {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int color_type = 0;
  int bit_depth = 0;
  std::vector<png_bytep> rows;
};

inline bool encode(std::FILE* file, WriteRequest* request) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, request->width, request->height, request->bit_depth, request->color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, request->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline Pixels read(const std::filesystem::path& path) {
  detail::File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw InputError("cannot open image: " + path.string());
  auto state = std::make_unique<detail::ReadState>();
  if (!detail::decode(file.get(), state.get())) throw InputError("cannot decode PNG: " + path.string());
  if (state->width == 0 || state->height == 0) throw InputError("zero-area image: " + path.string());

  Pixels px;
  px.extent = {state->width, state->height};
  px.channels = state->channels;
  px.bit_depth = state->bit_depth;
  const std::size_t count = px.extent.area() * static_cast<std::size_t>(px.channels);
  px.samples.resize(count);
  if (px.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      px.samples[i] = static_cast<std::uint16_t>((state->buffer[2 * i] << 8) | state->buffer[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) px.samples[i] = state->buffer[i];
  }
  return px;
}

/// Writes interleaved samples; `channels` is 1 (gray) or 3 (rgb), `bit_depth` 8 or 16.
inline void write(const std::filesystem::path& path, Extent extent, int channels, int bit_depth,
                  const std::vector<std::uint16_t>& samples) {
  ensure(channels == 1 || channels == 3, "png::write supports gray or rgb only");
  ensure(bit_depth == 8 || bit_depth == 16, "png::write supports 8 or 16 bit only");
  ensure(samples.size() == extent.area() * static_cast<std::size_t>(channels), "png::write sample count");

  const std::size_t bytes_per_sample = bit_depth / 8;
  const std::size_t row_bytes = extent.width * static_cast<std::size_t>(channels) * bytes_per_sample;
  std::vector<std::uint8_t> buffer(row_bytes * extent.height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bit_depth == 16) {
      buffer[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw InputError("cannot create image: " + path.string());
  auto request = std::make_unique<detail::WriteRequest>();
  request->width = static_cast<png_uint_32>(extent.width);
  request->height = static_cast<png_uint_32>(extent.height);
  request->color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  request->bit_depth = bit_depth;
  request->rows.resize(extent.height);
  for (std::size_t y = 0; y < extent.height; ++y) request->rows[y] = buffer.data() + y * row_bytes;
  if (!detail::encode(file.get(), request.get())) throw InputError("cannot encode PNG: " + path.string());
}

}  // namespace segstat::png
