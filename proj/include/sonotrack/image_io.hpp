#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "sonotrack/image.hpp"

namespace sonotrack {

// Binary PGM (P5, maxval 255). This path is byte-exact and dependency free,
// used for golden tests.
inline void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> row(img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c)
      row[c] = static_cast<std::uint8_t>(std::floor(clamp255(img.at(r, c)) + 0.5));
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("read_pgm: not a binary PGM: " + path);
  auto next_token = [&]() -> long {
    // skip whitespace and '#' comments
    for (;;) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(ch)) {
        f.get();
      } else {
        break;
      }
    }
    long v;
    f >> v;
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (maxval != 255) throw std::runtime_error("read_pgm: expected maxval 255");
  f.get();  // single whitespace after header
  GrayImage img(static_cast<int>(h), static_cast<int>(w));
  std::vector<std::uint8_t> buf(static_cast<size_t>(w) * h);
  f.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!f) throw std::runtime_error("read_pgm: truncated file " + path);
  for (size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i];
  return img;
}

inline void write_png(const GrayImage& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("write_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c)
      row[c] = static_cast<std::uint8_t>(std::floor(clamp255(img.at(r, c)) + 0.5));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline GrayImage read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("read_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  // Normalize anything libpng can hand us down to 8-bit grayscale.
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  GrayImage img(h, w);
  std::vector<std::uint8_t> row(w);
  for (int r = 0; r < h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < w; ++c) img.at(r, c) = row[c];
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

inline bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline GrayImage read_image(const std::string& path) {
  if (ends_with(path, ".pgm")) return read_pgm(path);
  if (ends_with(path, ".png")) return read_png(path);
  throw std::runtime_error("read_image: unsupported extension: " + path);
}

inline void write_image(const GrayImage& img, const std::string& path) {
  if (ends_with(path, ".pgm")) return write_pgm(img, path);
  if (ends_with(path, ".png")) return write_png(img, path);
  throw std::runtime_error("write_image: unsupported extension: " + path);
}

}  // namespace sonotrack
