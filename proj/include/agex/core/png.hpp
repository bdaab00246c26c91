#pragma once

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <png.h>

#include "agex/core/error.hpp"
#include "agex/phantom/image.hpp"

namespace agex::png {

struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  // row-major
};

namespace detail {

inline void on_error(png_structp p, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(p));
  if (err) *err = msg;
  png_longjmp(p, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

struct ReadCursor {
  std::string_view data;
  std::size_t offset = 0;
};

}  // namespace detail

inline std::string encode(const Gray8& img) {
  std::string err;
  png_structp p = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::on_error, detail::on_warning);
  if (!p) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(p);
  std::string out;
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_write_struct(&p, &info);
    throw IoError("PNG encode failed: " + err);
  }
  png_set_write_fn(
      p, &out,
      [](png_structp pp, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(pp))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(p, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(p, info);
  for (int r = 0; r < img.height; ++r) {
    png_write_row(p, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(r) * img.width));
  }
  png_write_end(p, nullptr);
  png_destroy_write_struct(&p, &info);
  return out;
}

inline Gray8 decode(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw IoError("not a PNG file");
  }
  std::string err;
  png_structp p = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::on_error, detail::on_warning);
  if (!p) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(p);
  detail::ReadCursor cursor{bytes, 0};
  Gray8 img;
  if (setjmp(png_jmpbuf(p))) {
    png_destroy_read_struct(&p, &info, nullptr);
    throw IoError("PNG decode failed: " + err);
  }
  png_set_read_fn(p, &cursor, [](png_structp pp, png_bytep out, png_size_t len) {
    auto* c = static_cast<detail::ReadCursor*>(png_get_io_ptr(pp));
    if (c->offset + len > c->data.size()) png_error(pp, "truncated PNG");
    std::memcpy(out, c->data.data() + c->offset, len);
    c->offset += len;
  });
  png_read_info(p, info);
  const auto color = png_get_color_type(p, info);
  const auto depth = png_get_bit_depth(p, info);
  if (depth == 16) png_set_strip_16(p);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(p);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(p);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(p);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(p, 1, -1, -1);
  }
  png_read_update_info(p, info);
  img.width = static_cast<int>(png_get_image_width(p, info));
  img.height = static_cast<int>(png_get_image_height(p, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r) {
    png_read_row(p, img.pixels.data() + static_cast<std::size_t>(r) * img.width, nullptr);
  }
  png_read_end(p, nullptr);
  png_destroy_read_struct(&p, &info, nullptr);
  return img;
}

inline unsigned char quantize(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::string encode(const GrayImage& img) {
  Gray8 g{img.resolution(), img.resolution(), {}};
  g.pixels.reserve(img.size());
  for (float v : img.pixels()) g.pixels.push_back(quantize(v));
  return encode(g);
}

inline GrayImage decode_square(std::string_view bytes) {
  Gray8 g = decode(bytes);
  if (g.width != g.height) throw ShapeError("expected a square PNG, got " + std::to_string(g.width) + "x" +
                                            std::to_string(g.height));
  std::vector<float> px;
  px.reserve(g.pixels.size());
  for (unsigned char v : g.pixels) px.push_back(static_cast<float>(v) / 255.0f);
  return GrayImage(g.width, std::move(px));
}

}  // namespace agex::png
