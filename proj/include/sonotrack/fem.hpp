#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sonotrack/tensor.hpp"

namespace sonotrack {

constexpr double kFemSigmaFloor = 1e-3;
constexpr int kFemGaussKsize = 5;

// Laplacian initialization of the high-frequency kernel.
inline std::vector<double> laplacian_kernel_3x3() {
  return {-1, -1, -1, -1, 8, -1, -1, -1, -1};
}

// Isotropic Gaussian sampled at integer offsets, normalized to sum 1.
inline std::vector<double> fem_gaussian_kernel(double sigma, int ksize = kFemGaussKsize) {
  if (sigma <= 0.0) throw std::domain_error("gaussian_kernel: sigma must be > 0");
  if (ksize % 2 == 0) throw std::invalid_argument("gaussian_kernel: even ksize");
  const int half = ksize / 2;
  std::vector<double> k(static_cast<size_t>(ksize) * ksize);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) {
      const double v = std::exp(-(double(i) * i + double(j) * j) / (2.0 * sigma * sigma));
      k[(i + half) * ksize + (j + half)] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return k;
}

// Analytic derivative of the normalized Gaussian kernel w.r.t. sigma
// (quotient rule over the normalization).
inline std::vector<double> fem_gaussian_kernel_grad_sigma(double sigma, int ksize) {
  if (sigma <= 0.0) throw std::domain_error("gaussian_kernel_grad_sigma: sigma must be > 0");
  if (ksize % 2 == 0) throw std::invalid_argument("gaussian_kernel_grad_sigma: even ksize");
  const int half = ksize / 2;
  const size_t n = static_cast<size_t>(ksize) * ksize;
  std::vector<double> g(n), dg(n);
  double s = 0.0, ds = 0.0;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j) {
      const double r2 = double(i) * i + double(j) * j;
      const size_t idx = (i + half) * ksize + (j + half);
      g[idx] = std::exp(-r2 / (2.0 * sigma * sigma));
      dg[idx] = g[idx] * r2 / (sigma * sigma * sigma);
      s += g[idx];
      ds += dg[idx];
    }
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = (dg[i] * s - g[i] * ds) / (s * s);
  return out;
}

// Learnable parameters of the frequency enhancement block. Values are
// immutable snapshots; updates create new instances.
struct FemParams {
  double alpha = 1.0;
  double sigma = 1.0;
  std::vector<std::vector<double>> high_kernel;  // one 3x3 per channel

  static FemParams init(int channels) {
    FemParams p;
    p.high_kernel.assign(channels, laplacian_kernel_3x3());
    return p;
  }

  double clamped_sigma() const { return std::max(sigma, kFemSigmaFloor); }
};

// x + alpha * Conv_h(x) + Conv_l(x), both depthwise, same-padded, unbiased.
inline FeatureTensor fem_forward(const FeatureTensor& x, const FemParams& p) {
  if (static_cast<int>(p.high_kernel.size()) != x.channels)
    throw std::invalid_argument("fem_forward: channel mismatch");
  const FeatureTensor high = depthwise_conv2d(x, p.high_kernel, 3);
  const std::vector<double> gk = fem_gaussian_kernel(p.clamped_sigma(), kFemGaussKsize);
  const std::vector<std::vector<double>> low_k(x.channels, gk);
  const FeatureTensor low = depthwise_conv2d(x, low_k, kFemGaussKsize);
  FeatureTensor out(x.channels, x.height, x.width);
  for (size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = x.data[i] + p.alpha * high.data[i] + low.data[i];
  return out;
}

}  // namespace sonotrack
