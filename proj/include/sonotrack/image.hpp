#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sonotrack/bbox.hpp"

namespace sonotrack {

// Single-channel image. Intensities live in [0, 255]; stored as double so
// intermediate results keep full precision, quantized only on export.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

  double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }

  bool same_shape(const GrayImage& o) const {
    return height == o.height && width == o.width;
  }
};

inline double clamp255(double v) { return std::min(255.0, std::max(0.0, v)); }

inline std::vector<double> gaussian_taps_1d(double sigma, int ksize) {
  if (sigma <= 0.0) throw std::domain_error("gaussian: sigma must be > 0");
  if (ksize < 3 || ksize % 2 == 0)
    throw std::invalid_argument("gaussian: ksize must be odd and >= 3");
  const int half = ksize / 2;
  std::vector<double> taps(ksize);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    taps[i + half] = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
    sum += taps[i + half];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

inline int default_ksize(double sigma) {
  return 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
}

// Isotropic Gaussian blur, replicate border. The 2-D kernel is the outer
// product of the normalized 1-D taps, so two separable passes are exact.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma, int ksize) {
  const std::vector<double> taps = gaussian_taps_1d(sigma, ksize);
  const int half = ksize / 2;
  GrayImage tmp(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int j = -half; j <= half; ++j) {
        const int cc = std::clamp(c + j, 0, img.width - 1);
        acc += taps[j + half] * img.at(r, cc);
      }
      tmp.at(r, c) = acc;
    }
  GrayImage out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int rr = std::clamp(r + i, 0, img.height - 1);
        acc += taps[i + half] * tmp.at(rr, c);
      }
      out.at(r, c) = acc;
    }
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  return gaussian_blur(img, sigma, default_ksize(sigma));
}

// Unsharp-style high-frequency boost: img + gain * (img - blur(img)),
// clamped to the 8-bit range. gain = 2 adds the high-frequency image twice.
inline GrayImage high_freq_enhance(const GrayImage& img, double sigma, int ksize,
                                   double gain) {
  if (gain < 0.0) throw std::invalid_argument("high_freq_enhance: gain must be >= 0");
  const GrayImage low = gaussian_blur(img, sigma, ksize);
  GrayImage out(img.height, img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = clamp255(img.pixels[i] + gain * (img.pixels[i] - low.pixels[i]));
  return out;
}

inline GrayImage binarize(const GrayImage& img, double thres) {
  GrayImage out(img.height, img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = img.pixels[i] >= thres ? 255.0 : 0.0;
  return out;
}

// Bilinear sample with zero outside the image. Coordinates are continuous,
// pixel (r, c) has its center at (c + 0.5, r + 0.5).
inline double sample_bilinear(const GrayImage& img, double x, double y) {
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  auto px = [&](int r, int c) -> double {
    if (r < 0 || c < 0 || r >= img.height || c >= img.width) return 0.0;
    return img.at(r, c);
  };
  return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
         ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

inline GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
  GrayImage out(out_h, out_w);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c)
      out.at(r, c) = sample_bilinear(img, (c + 0.5) * sx, (r + 0.5) * sy);
  return out;
}

// Affine map between the source frame and a square crop: out = (in - offset) * scale.
struct CropMap {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  BBox to_crop(const BBox& b) const {
    return BBox{(b.x - offset_x) * scale, (b.y - offset_y) * scale, b.w * scale,
                b.h * scale};
  }
  BBox to_frame(const BBox& b) const {
    return BBox{b.x / scale + offset_x, b.y / scale + offset_y, b.w / scale,
                b.h / scale};
  }
};

struct CropResult {
  GrayImage patch;
  CropMap map;
};

// Square crop centered on the box, side = context_factor * sqrt(w*h),
// zero-padded outside the frame, bilinearly resized to out_size.
inline CropResult crop_resize(const GrayImage& img, const BBox& box,
                              double context_factor, int out_size) {
  if (box.is_absent()) throw std::domain_error("crop_resize: absent box");
  if (context_factor <= 0.0)
    throw std::invalid_argument("crop_resize: context_factor must be > 0");
  if (box.area() <= 0.0) throw std::domain_error("crop_resize: degenerate box");
  const double side = context_factor * std::sqrt(box.w * box.h);
  CropResult res;
  res.map.scale = out_size / side;
  res.map.offset_x = box.cx() - 0.5 * side;
  res.map.offset_y = box.cy() - 0.5 * side;
  res.patch = GrayImage(out_size, out_size);
  for (int r = 0; r < out_size; ++r)
    for (int c = 0; c < out_size; ++c) {
      const double x = res.map.offset_x + (c + 0.5) / res.map.scale;
      const double y = res.map.offset_y + (r + 0.5) / res.map.scale;
      res.patch.at(r, c) = sample_bilinear(img, x, y);
    }
  return res;
}

// Mean of mask/255 over pixels whose centers fall inside the half-open box.
// Returns 0 when no pixel center is covered.
inline double mean_in_box(const GrayImage& mask, const BBox& box) {
  const int c0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
  const int c1 = std::min(mask.width - 1,
                          static_cast<int>(std::floor(box.right() - 0.5 - 1e-12)));
  const int r1 = std::min(mask.height - 1,
                          static_cast<int>(std::floor(box.bottom() - 0.5 - 1e-12)));
  double sum = 0.0;
  long count = 0;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      sum += mask.at(r, c);
      ++count;
    }
  if (count == 0) return 0.0;
  return sum / (255.0 * count);
}

// Mean raw intensity over pixel centers inside the box (same coverage rule).
inline double mean_intensity_in_box(const GrayImage& img, const BBox& box) {
  const int c0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
  const int c1 = std::min(img.width - 1,
                          static_cast<int>(std::floor(box.right() - 0.5 - 1e-12)));
  const int r1 = std::min(img.height - 1,
                          static_cast<int>(std::floor(box.bottom() - 0.5 - 1e-12)));
  double sum = 0.0;
  long count = 0;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      sum += img.at(r, c);
      ++count;
    }
  if (count == 0) return 0.0;
  return sum / count;
}

inline GrayImage quantize(const GrayImage& img) {
  GrayImage out(img.height, img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = std::floor(clamp255(img.pixels[i]) + 0.5);
  return out;
}

}  // namespace sonotrack
