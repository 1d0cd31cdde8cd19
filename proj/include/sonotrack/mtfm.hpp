#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sonotrack/image.hpp"
#include "sonotrack/rng.hpp"
#include "sonotrack/tensor.hpp"

namespace sonotrack {

constexpr double kBinaryTemplateThreshold = 30.0;

struct CrossAttnParams {
  LinearLayer wq, wk, wv, wo;  // all C -> C, no bias
};

// Weights of the multi-view template fusion block.
struct MtfmParams {
  int channels = 0;
  ConvKernel fuse_conv;     // 1x1, 2C -> C
  double ce_w = 1.0;        // 1x1 conv over the channel-pooled plane
  double ce_b = 0.0;
  LinearLayer se_mlp1;      // C -> C/4
  LinearLayer se_mlp2;      // C/4 -> C
  CrossAttnParams attn1;    // CrossAttn(Z_d, Z_d^cs)
  CrossAttnParams attn2;    // CrossAttn(Z, Z_mv)
  LinearLayer out_linear;   // C -> C

  static MtfmParams init(int channels, Rng& rng);
};

namespace detail {
inline void fill_uniform(std::vector<double>& v, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : v) x = rng.uniform(-bound, bound);
}
inline LinearLayer make_linear(int in, int out, bool bias, Rng& rng) {
  LinearLayer l(in, out);
  fill_uniform(l.weight, in, rng);
  if (bias) {
    l.bias.assign(out, 0.0);
    fill_uniform(l.bias, in, rng);
  }
  return l;
}
}  // namespace detail

inline MtfmParams MtfmParams::init(int channels, Rng& rng) {
  MtfmParams p;
  p.channels = channels;
  p.fuse_conv = ConvKernel(channels, 2 * channels, 1, 1);
  detail::fill_uniform(p.fuse_conv.w, 2 * channels, rng);
  p.fuse_conv.bias.assign(channels, 0.0);
  detail::fill_uniform(p.fuse_conv.bias, 2 * channels, rng);
  p.ce_w = rng.uniform(-1.0, 1.0);
  p.ce_b = rng.uniform(-1.0, 1.0);
  const int hidden = std::max(1, channels / 4);
  p.se_mlp1 = detail::make_linear(channels, hidden, true, rng);
  p.se_mlp2 = detail::make_linear(hidden, channels, true, rng);
  for (CrossAttnParams* a : {&p.attn1, &p.attn2}) {
    a->wq = detail::make_linear(channels, channels, false, rng);
    a->wk = detail::make_linear(channels, channels, false, rng);
    a->wv = detail::make_linear(channels, channels, false, rng);
    a->wo = detail::make_linear(channels, channels, false, rng);
  }
  p.out_linear = detail::make_linear(channels, channels, true, rng);
  return p;
}

inline GrayImage make_binary_template(const GrayImage& z_d) {
  return binarize(z_d, kBinaryTemplateThreshold);
}

// Queries from `q_feat` tokens, keys/values from `kv_feat` tokens, single
// head, output projection applied before reshaping back to C x H x W.
inline FeatureTensor cross_attention(const FeatureTensor& q_feat,
                                     const FeatureTensor& kv_feat,
                                     const CrossAttnParams& p) {
  const TokenMatrix q = linear(to_tokens(q_feat), p.wq);
  const TokenMatrix k = linear(to_tokens(kv_feat), p.wk);
  const TokenMatrix v = linear(to_tokens(kv_feat), p.wv);
  const TokenMatrix attn = attention(q, k, v);
  const TokenMatrix out = linear(attn, p.wo);
  return from_tokens(out, q_feat.height, q_feat.width);
}

// Channel/spatial multi-view enhancement of the dynamic template:
//   Z_f  = Conv1x1(concat(Z_d, Z_db))
//   Z_ce = Conv1x1(Pool_channel(Z_f)) * Z_f   (plane broadcast)
//   Z_se = MLP(Pool_spatial(Z_f)) * Z_f       (vector broadcast)
// returns Z_ce + Z_se.
inline FeatureTensor multiview_enhance(const FeatureTensor& z_d,
                                       const FeatureTensor& z_db,
                                       const MtfmParams& p) {
  if (!z_d.same_shape(z_db))
    throw std::invalid_argument("multiview_enhance: shape mismatch");
  if (z_d.channels != p.channels)
    throw std::invalid_argument("multiview_enhance: channel mismatch");
  FeatureTensor cat(2 * z_d.channels, z_d.height, z_d.width);
  std::copy(z_d.data.begin(), z_d.data.end(), cat.data.begin());
  std::copy(z_db.data.begin(), z_db.data.end(),
            cat.data.begin() + z_d.data.size());
  const FeatureTensor z_f = conv2d(cat, p.fuse_conv);

  const FeatureTensor plane = pool_channel(z_f);
  FeatureTensor out(z_f.channels, z_f.height, z_f.width);
  for (int y = 0; y < z_f.height; ++y)
    for (int x = 0; x < z_f.width; ++x) {
      const double gate = p.ce_w * plane.at(0, y, x) + p.ce_b;
      for (int c = 0; c < z_f.channels; ++c)
        out.at(c, y, x) = gate * z_f.at(c, y, x);
    }

  std::vector<double> vec = apply_linear(pool_spatial(z_f), p.se_mlp1);
  for (double& v : vec) v = std::max(0.0, v);
  vec = apply_linear(vec, p.se_mlp2);
  for (int c = 0; c < z_f.channels; ++c)
    for (int y = 0; y < z_f.height; ++y)
      for (int x = 0; x < z_f.width; ++x)
        out.at(c, y, x) += vec[c] * z_f.at(c, y, x);
  return out;
}

// Z_mv = CrossAttn(Z_d, Z_d^cs) + Z_d
inline FeatureTensor fuse_dynamic(const FeatureTensor& z_d,
                                  const FeatureTensor& z_d_cs,
                                  const MtfmParams& p) {
  if (!z_d.same_shape(z_d_cs))
    throw std::invalid_argument("fuse_dynamic: shape mismatch");
  FeatureTensor out = cross_attention(z_d, z_d_cs, p.attn1);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += z_d.data[i];
  return out;
}

// Z_cross = CrossAttn(Z, Z_mv) + Z_d + Z_mv
// Z_fused = Linear(Z_cross) + Z_d + Z_mv
inline FeatureTensor fuse_templates(const FeatureTensor& z,
                                    const FeatureTensor& z_mv,
                                    const FeatureTensor& z_d,
                                    const MtfmParams& p) {
  if (!z.same_shape(z_mv) || !z.same_shape(z_d))
    throw std::invalid_argument("fuse_templates: shape mismatch");
  FeatureTensor cross = cross_attention(z, z_mv, p.attn2);
  for (size_t i = 0; i < cross.data.size(); ++i)
    cross.data[i] += z_d.data[i] + z_mv.data[i];
  const TokenMatrix lin = linear(to_tokens(cross), p.out_linear);
  FeatureTensor out = from_tokens(lin, z.height, z.width);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += z_d.data[i] + z_mv.data[i];
  return out;
}

// Full fusion of one template triple; cached by the tracker between updates.
inline FeatureTensor mtfm_fuse(const FeatureTensor& z_fixed,
                               const FeatureTensor& z_d,
                               const FeatureTensor& z_db,
                               const MtfmParams& p) {
  const FeatureTensor z_cs = multiview_enhance(z_d, z_db, p);
  const FeatureTensor z_mv = fuse_dynamic(z_d, z_cs, p);
  return fuse_templates(z_fixed, z_mv, z_d, p);
}

}  // namespace sonotrack
