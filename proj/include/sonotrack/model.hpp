#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonotrack/fem.hpp"
#include "sonotrack/kalman.hpp"
#include "sonotrack/mtfm.hpp"
#include "sonotrack/otcm.hpp"
#include "sonotrack/rng.hpp"
#include "sonotrack/tensor.hpp"

namespace sonotrack {

struct TrackerConfig {
  int template_size = 128;
  int search_size = 256;
  double template_context = 2.0;
  double search_context = 4.0;
  int stride = 16;
  int embed_dim = 32;

  double enhance_sigma = 2.0;
  int enhance_ksize = 0;  // 0 = derive from sigma
  double enhance_gain = 2.0;

  int otcm_k = kDefaultTopK;
  double iob_thresh = kIobGate;
  int warmup = 10;
  KalmanNoise noise;

  int update_interval = 50;
  double update_min_score = 0.5;

  std::vector<double> scales = {0.95, 1.0, 1.05};
  double scale_penalty = 0.80;  // discount on non-unit scale scores
  std::uint64_t seed = 1;

  bool use_otcm = true;
  bool use_mtfm = true;
  bool use_fem = true;
  bool use_enhance = true;

  int blur_ksize() const {
    return enhance_ksize > 0 ? enhance_ksize : default_ksize(enhance_sigma);
  }

  void validate() const {
    if (template_size % stride != 0 || search_size % stride != 0)
      throw std::invalid_argument("config: sizes must be divisible by stride");
    bool has_unit = false;
    for (double s : scales) has_unit = has_unit || s == 1.0;
    if (!has_unit) throw std::invalid_argument("config: scales must contain 1.0");
    if (blur_ksize() % 2 == 0)
      throw std::invalid_argument("config: enhance ksize must be odd");
  }
};

// Everything needed to reproduce a tracking run: config, seed, embedding
// projection and the FEM/MTFM weights derived from the seed.
struct Model {
  TrackerConfig cfg;
  LinearLayer embed;  // (stride*stride) -> embed_dim
  FemParams fem;
  MtfmParams mtfm;

  static Model from_seed(const TrackerConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(cfg.seed);
    m.embed = detail::make_linear(cfg.stride * cfg.stride, cfg.embed_dim, true, rng);
    m.fem = FemParams::init(cfg.embed_dim);
    m.mtfm = MtfmParams::init(cfg.embed_dim, rng);
    return m;
  }
};

namespace detail {

inline void put(std::ostream& os, const std::string& key, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << key << " " << buf << "\n";
}
inline void put(std::ostream& os, const std::string& key, const std::vector<double>& v) {
  os << key << " " << v.size();
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    os << " " << buf;
  }
  os << "\n";
}
inline void put_linear(std::ostream& os, const std::string& key, const LinearLayer& l) {
  os << key << ".shape " << l.in_dim << " " << l.out_dim << " "
     << (l.bias.empty() ? 0 : 1) << "\n";
  put(os, key + ".weight", l.weight);
  if (!l.bias.empty()) put(os, key + ".bias", l.bias);
}

class ModelReader {
 public:
  explicit ModelReader(std::istream& is) : is_(is) {}

  std::string key() {
    std::string k;
    if (!(is_ >> k)) throw std::runtime_error("model file: unexpected end");
    return k;
  }
  double num() {
    double v;
    if (!(is_ >> v)) throw std::runtime_error("model file: expected number");
    return v;
  }
  long integer() { return static_cast<long>(num()); }
  std::vector<double> vec() {
    const long n = integer();
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = num();
    return v;
  }
  void expect(const std::string& want) {
    const std::string got = key();
    if (got != want)
      throw std::runtime_error("model file: expected '" + want + "', got '" + got + "'");
  }
  LinearLayer read_linear(const std::string& name) {
    expect(name + ".shape");
    LinearLayer l(static_cast<int>(integer()), 0);
    l.out_dim = static_cast<int>(integer());
    const bool has_bias = integer() != 0;
    l.weight.resize(static_cast<size_t>(l.out_dim) * l.in_dim);
    expect(name + ".weight");
    l.weight = vec();
    if (has_bias) {
      expect(name + ".bias");
      l.bias = vec();
    }
    return l;
  }

 private:
  std::istream& is_;
};

}  // namespace detail

inline void save_model(const Model& m, std::ostream& os) {
  using detail::put;
  os << "SONOTRACK-MODEL v1\n";
  os << "seed " << m.cfg.seed << "\n";
  os << "template_size " << m.cfg.template_size << "\n";
  os << "search_size " << m.cfg.search_size << "\n";
  put(os, "template_context", m.cfg.template_context);
  put(os, "search_context", m.cfg.search_context);
  os << "stride " << m.cfg.stride << "\n";
  os << "embed_dim " << m.cfg.embed_dim << "\n";
  put(os, "enhance_sigma", m.cfg.enhance_sigma);
  os << "enhance_ksize " << m.cfg.enhance_ksize << "\n";
  put(os, "enhance_gain", m.cfg.enhance_gain);
  os << "otcm_k " << m.cfg.otcm_k << "\n";
  put(os, "iob_thresh", m.cfg.iob_thresh);
  os << "warmup " << m.cfg.warmup << "\n";
  put(os, "noise_q_pos", m.cfg.noise.q_pos);
  put(os, "noise_q_vel", m.cfg.noise.q_vel);
  put(os, "noise_r_pos", m.cfg.noise.r_pos);
  put(os, "noise_init_scale", m.cfg.noise.init_scale);
  os << "update_interval " << m.cfg.update_interval << "\n";
  put(os, "update_min_score", m.cfg.update_min_score);
  put(os, "scales", m.cfg.scales);
  put(os, "scale_penalty", m.cfg.scale_penalty);
  detail::put_linear(os, "embed", m.embed);
  put(os, "fem.alpha", m.fem.alpha);
  put(os, "fem.sigma", m.fem.sigma);
  os << "fem.high_kernel.channels " << m.fem.high_kernel.size() << "\n";
  for (size_t c = 0; c < m.fem.high_kernel.size(); ++c)
    put(os, "fem.high_kernel." + std::to_string(c), m.fem.high_kernel[c]);
  os << "mtfm.channels " << m.mtfm.channels << "\n";
  os << "mtfm.fuse_conv.shape " << m.mtfm.fuse_conv.out_c << " "
     << m.mtfm.fuse_conv.in_c << "\n";
  put(os, "mtfm.fuse_conv.weight", m.mtfm.fuse_conv.w);
  put(os, "mtfm.fuse_conv.bias", m.mtfm.fuse_conv.bias);
  put(os, "mtfm.ce_w", m.mtfm.ce_w);
  put(os, "mtfm.ce_b", m.mtfm.ce_b);
  detail::put_linear(os, "mtfm.se_mlp1", m.mtfm.se_mlp1);
  detail::put_linear(os, "mtfm.se_mlp2", m.mtfm.se_mlp2);
  detail::put_linear(os, "mtfm.attn1.wq", m.mtfm.attn1.wq);
  detail::put_linear(os, "mtfm.attn1.wk", m.mtfm.attn1.wk);
  detail::put_linear(os, "mtfm.attn1.wv", m.mtfm.attn1.wv);
  detail::put_linear(os, "mtfm.attn1.wo", m.mtfm.attn1.wo);
  detail::put_linear(os, "mtfm.attn2.wq", m.mtfm.attn2.wq);
  detail::put_linear(os, "mtfm.attn2.wk", m.mtfm.attn2.wk);
  detail::put_linear(os, "mtfm.attn2.wv", m.mtfm.attn2.wv);
  detail::put_linear(os, "mtfm.attn2.wo", m.mtfm.attn2.wo);
  detail::put_linear(os, "mtfm.out_linear", m.mtfm.out_linear);
}

inline Model load_model(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "SONOTRACK-MODEL" || version != "v1")
    throw std::runtime_error("model file: bad header (want SONOTRACK-MODEL v1)");
  detail::ModelReader r(is);
  Model m;
  r.expect("seed");
  m.cfg.seed = static_cast<std::uint64_t>(r.num());
  r.expect("template_size");
  m.cfg.template_size = static_cast<int>(r.integer());
  r.expect("search_size");
  m.cfg.search_size = static_cast<int>(r.integer());
  r.expect("template_context");
  m.cfg.template_context = r.num();
  r.expect("search_context");
  m.cfg.search_context = r.num();
  r.expect("stride");
  m.cfg.stride = static_cast<int>(r.integer());
  r.expect("embed_dim");
  m.cfg.embed_dim = static_cast<int>(r.integer());
  r.expect("enhance_sigma");
  m.cfg.enhance_sigma = r.num();
  r.expect("enhance_ksize");
  m.cfg.enhance_ksize = static_cast<int>(r.integer());
  r.expect("enhance_gain");
  m.cfg.enhance_gain = r.num();
  r.expect("otcm_k");
  m.cfg.otcm_k = static_cast<int>(r.integer());
  r.expect("iob_thresh");
  m.cfg.iob_thresh = r.num();
  r.expect("warmup");
  m.cfg.warmup = static_cast<int>(r.integer());
  r.expect("noise_q_pos");
  m.cfg.noise.q_pos = r.num();
  r.expect("noise_q_vel");
  m.cfg.noise.q_vel = r.num();
  r.expect("noise_r_pos");
  m.cfg.noise.r_pos = r.num();
  r.expect("noise_init_scale");
  m.cfg.noise.init_scale = r.num();
  r.expect("update_interval");
  m.cfg.update_interval = static_cast<int>(r.integer());
  r.expect("update_min_score");
  m.cfg.update_min_score = r.num();
  r.expect("scales");
  m.cfg.scales = r.vec();
  r.expect("scale_penalty");
  m.cfg.scale_penalty = r.num();
  m.embed = r.read_linear("embed");
  r.expect("fem.alpha");
  m.fem.alpha = r.num();
  r.expect("fem.sigma");
  m.fem.sigma = r.num();
  r.expect("fem.high_kernel.channels");
  const long ch = r.integer();
  m.fem.high_kernel.resize(ch);
  for (long c = 0; c < ch; ++c) {
    r.expect("fem.high_kernel." + std::to_string(c));
    m.fem.high_kernel[c] = r.vec();
  }
  r.expect("mtfm.channels");
  m.mtfm.channels = static_cast<int>(r.integer());
  r.expect("mtfm.fuse_conv.shape");
  const int oc = static_cast<int>(r.integer());
  const int ic = static_cast<int>(r.integer());
  m.mtfm.fuse_conv = ConvKernel(oc, ic, 1, 1);
  r.expect("mtfm.fuse_conv.weight");
  m.mtfm.fuse_conv.w = r.vec();
  r.expect("mtfm.fuse_conv.bias");
  m.mtfm.fuse_conv.bias = r.vec();
  r.expect("mtfm.ce_w");
  m.mtfm.ce_w = r.num();
  r.expect("mtfm.ce_b");
  m.mtfm.ce_b = r.num();
  m.mtfm.se_mlp1 = r.read_linear("mtfm.se_mlp1");
  m.mtfm.se_mlp2 = r.read_linear("mtfm.se_mlp2");
  m.mtfm.attn1.wq = r.read_linear("mtfm.attn1.wq");
  m.mtfm.attn1.wk = r.read_linear("mtfm.attn1.wk");
  m.mtfm.attn1.wv = r.read_linear("mtfm.attn1.wv");
  m.mtfm.attn1.wo = r.read_linear("mtfm.attn1.wo");
  m.mtfm.attn2.wq = r.read_linear("mtfm.attn2.wq");
  m.mtfm.attn2.wk = r.read_linear("mtfm.attn2.wk");
  m.mtfm.attn2.wv = r.read_linear("mtfm.attn2.wv");
  m.mtfm.attn2.wo = r.read_linear("mtfm.attn2.wo");
  m.mtfm.out_linear = r.read_linear("mtfm.out_linear");
  m.cfg.validate();
  return m;
}

inline void save_model_file(const Model& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open model file for writing: " + path);
  save_model(m, f);
}

inline Model load_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model file: " + path);
  return load_model(f);
}

}  // namespace sonotrack
