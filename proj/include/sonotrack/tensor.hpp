#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sonotrack/image.hpp"

namespace sonotrack {

// Dense rank-3 real array, channel-major then row-major.
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureTensor() = default;
  FeatureTensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  bool same_shape(const FeatureTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  int tokens() const { return height * width; }
};

struct TokenMatrix {
  int tokens = 0;
  int dim = 0;
  std::vector<double> data;

  TokenMatrix() = default;
  TokenMatrix(int t, int d, double fill = 0.0)
      : tokens(t), dim(d), data(static_cast<size_t>(t) * d, fill) {}

  double& at(int t, int d) { return data[static_cast<size_t>(t) * dim + d]; }
  double at(int t, int d) const { return data[static_cast<size_t>(t) * dim + d]; }
};

// C x H x W  <->  (H*W) x C token views.
inline TokenMatrix to_tokens(const FeatureTensor& x) {
  TokenMatrix m(x.height * x.width, x.channels);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx)
        m.at(y * x.width + xx, c) = x.at(c, y, xx);
  return m;
}

inline FeatureTensor from_tokens(const TokenMatrix& m, int height, int width) {
  if (m.tokens != height * width)
    throw std::invalid_argument("from_tokens: token count mismatch");
  FeatureTensor x(m.dim, height, width);
  for (int c = 0; c < m.dim; ++c)
    for (int y = 0; y < height; ++y)
      for (int xx = 0; xx < width; ++xx)
        x.at(c, y, xx) = m.at(y * width + xx, c);
  return x;
}

struct ConvKernel {
  int out_c = 0, in_c = 0, kh = 0, kw = 0;
  std::vector<double> w;  // [out_c][in_c][kh][kw]
  std::vector<double> bias;  // per output channel, may be empty

  ConvKernel() = default;
  ConvKernel(int oc, int ic, int h, int kw_) : out_c(oc), in_c(ic), kh(h), kw(kw_),
      w(static_cast<size_t>(oc) * ic * h * kw_, 0.0) {}

  double& at(int oc, int ic, int i, int j) {
    return w[((static_cast<size_t>(oc) * in_c + ic) * kh + i) * kw + j];
  }
  double at(int oc, int ic, int i, int j) const {
    return w[((static_cast<size_t>(oc) * in_c + ic) * kh + i) * kw + j];
  }
};

// Same-padding correlation (no kernel flip), stride 1, zero padding.
inline FeatureTensor conv2d(const FeatureTensor& x, const ConvKernel& k) {
  if (k.in_c != x.channels) throw std::invalid_argument("conv2d: channel mismatch");
  if (k.kh % 2 == 0 || k.kw % 2 == 0)
    throw std::invalid_argument("conv2d: kernel dims must be odd");
  if (!k.bias.empty() && static_cast<int>(k.bias.size()) != k.out_c)
    throw std::invalid_argument("conv2d: bias length mismatch");
  const int hh = k.kh / 2, hw = k.kw / 2;
  FeatureTensor out(k.out_c, x.height, x.width);
  for (int oc = 0; oc < k.out_c; ++oc)
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx) {
        double acc = k.bias.empty() ? 0.0 : k.bias[oc];
        for (int ic = 0; ic < x.channels; ++ic)
          for (int i = -hh; i <= hh; ++i) {
            const int yy = y + i;
            if (yy < 0 || yy >= x.height) continue;
            for (int j = -hw; j <= hw; ++j) {
              const int xj = xx + j;
              if (xj < 0 || xj >= x.width) continue;
              acc += k.at(oc, ic, i + hh, j + hw) * x.at(ic, yy, xj);
            }
          }
        out.at(oc, y, xx) = acc;
      }
  return out;
}

// One odd k x k kernel per channel, applied channel-wise; zero padding,
// unbiased.
inline FeatureTensor depthwise_conv2d(const FeatureTensor& x,
                                      const std::vector<std::vector<double>>& kernels,
                                      int ksize) {
  if (static_cast<int>(kernels.size()) != x.channels)
    throw std::invalid_argument("depthwise_conv2d: kernel count mismatch");
  if (ksize % 2 == 0) throw std::invalid_argument("depthwise_conv2d: even ksize");
  const int half = ksize / 2;
  FeatureTensor out(x.channels, x.height, x.width);
  for (int c = 0; c < x.channels; ++c) {
    const std::vector<double>& k = kernels[c];
    if (static_cast<int>(k.size()) != ksize * ksize)
      throw std::invalid_argument("depthwise_conv2d: kernel size mismatch");
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int yy = y + i;
          if (yy < 0 || yy >= x.height) continue;
          for (int j = -half; j <= half; ++j) {
            const int xj = xx + j;
            if (xj < 0 || xj >= x.width) continue;
            acc += k[(i + half) * ksize + (j + half)] * x.at(c, yy, xj);
          }
        }
        out.at(c, y, xx) = acc;
      }
  }
  return out;
}

inline TokenMatrix softmax_rows(const TokenMatrix& m) {
  TokenMatrix out(m.tokens, m.dim);
  for (int t = 0; t < m.tokens; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < m.dim; ++d) mx = std::max(mx, m.at(t, d));
    double sum = 0.0;
    for (int d = 0; d < m.dim; ++d) {
      out.at(t, d) = std::exp(m.at(t, d) - mx);
      sum += out.at(t, d);
    }
    for (int d = 0; d < m.dim; ++d) out.at(t, d) /= sum;
  }
  return out;
}

// softmax(scale * q k^T) v. scale <= 0 means the 1/sqrt(dim) default.
inline TokenMatrix attention(const TokenMatrix& q, const TokenMatrix& k,
                             const TokenMatrix& v, double scale = -1.0) {
  if (q.dim != k.dim) throw std::invalid_argument("attention: q/k dim mismatch");
  if (k.tokens != v.tokens) throw std::invalid_argument("attention: k/v token mismatch");
  if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(q.dim));
  TokenMatrix logits(q.tokens, k.tokens);
  for (int i = 0; i < q.tokens; ++i)
    for (int j = 0; j < k.tokens; ++j) {
      double acc = 0.0;
      for (int d = 0; d < q.dim; ++d) acc += q.at(i, d) * k.at(j, d);
      logits.at(i, j) = scale * acc;
    }
  const TokenMatrix weights = softmax_rows(logits);
  TokenMatrix out(q.tokens, v.dim);
  for (int i = 0; i < q.tokens; ++i)
    for (int d = 0; d < v.dim; ++d) {
      double acc = 0.0;
      for (int j = 0; j < k.tokens; ++j) acc += weights.at(i, j) * v.at(j, d);
      out.at(i, d) = acc;
    }
  return out;
}

struct LinearLayer {
  int in_dim = 0, out_dim = 0;
  std::vector<double> weight;  // [out_dim][in_dim]
  std::vector<double> bias;    // [out_dim], may be empty

  LinearLayer() = default;
  LinearLayer(int in, int out)
      : in_dim(in), out_dim(out), weight(static_cast<size_t>(out) * in, 0.0) {}

  double& w(int o, int i) { return weight[static_cast<size_t>(o) * in_dim + i]; }
  double w(int o, int i) const { return weight[static_cast<size_t>(o) * in_dim + i]; }
};

inline TokenMatrix linear(const TokenMatrix& x, const LinearLayer& l) {
  if (l.in_dim != x.dim) throw std::invalid_argument("linear: dim mismatch");
  TokenMatrix out(x.tokens, l.out_dim);
  for (int t = 0; t < x.tokens; ++t)
    for (int o = 0; o < l.out_dim; ++o) {
      double acc = l.bias.empty() ? 0.0 : l.bias[o];
      for (int i = 0; i < x.dim; ++i) acc += l.w(o, i) * x.at(t, i);
      out.at(t, o) = acc;
    }
  return out;
}

inline std::vector<double> apply_linear(const std::vector<double>& v,
                                        const LinearLayer& l) {
  if (l.in_dim != static_cast<int>(v.size()))
    throw std::invalid_argument("apply_linear: dim mismatch");
  std::vector<double> out(l.out_dim, 0.0);
  for (int o = 0; o < l.out_dim; ++o) {
    double acc = l.bias.empty() ? 0.0 : l.bias[o];
    for (int i = 0; i < l.in_dim; ++i) acc += l.w(o, i) * v[i];
    out[o] = acc;
  }
  return out;
}

// Mean over the channel axis -> 1 x H x W.
inline FeatureTensor pool_channel(const FeatureTensor& x) {
  FeatureTensor out(1, x.height, x.width);
  for (int y = 0; y < x.height; ++y)
    for (int xx = 0; xx < x.width; ++xx) {
      double acc = 0.0;
      for (int c = 0; c < x.channels; ++c) acc += x.at(c, y, xx);
      out.at(0, y, xx) = acc / x.channels;
    }
  return out;
}

// Global mean over H x W per channel.
inline std::vector<double> pool_spatial(const FeatureTensor& x) {
  std::vector<double> out(x.channels, 0.0);
  const double n = static_cast<double>(x.height) * x.width;
  for (int c = 0; c < x.channels; ++c) {
    double acc = 0.0;
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx) acc += x.at(c, y, xx);
    out[c] = acc / n;
  }
  return out;
}

// Non-overlapping patch flattening + linear projection. Pixel values are
// scaled by 1/255 before projection so token magnitudes stay O(1).
// Projection weight is [dim][patch*patch], bias [dim].
inline FeatureTensor patch_embed(const GrayImage& img, int patch,
                                 const LinearLayer& proj) {
  if (img.height % patch != 0 || img.width % patch != 0)
    throw std::invalid_argument("patch_embed: image dims not divisible by patch");
  if (proj.in_dim != patch * patch)
    throw std::invalid_argument("patch_embed: projection input dim mismatch");
  const int gh = img.height / patch;
  const int gw = img.width / patch;
  FeatureTensor out(proj.out_dim, gh, gw);
  std::vector<double> flat(static_cast<size_t>(patch) * patch);
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      for (int i = 0; i < patch; ++i)
        for (int j = 0; j < patch; ++j)
          flat[static_cast<size_t>(i) * patch + j] =
              img.at(gy * patch + i, gx * patch + j) / 255.0;
      const std::vector<double> tok = apply_linear(flat, proj);
      for (int c = 0; c < proj.out_dim; ++c) out.at(c, gy, gx) = tok[c];
    }
  return out;
}

}  // namespace sonotrack
