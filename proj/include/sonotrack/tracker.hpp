#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "sonotrack/fem.hpp"
#include "sonotrack/image.hpp"
#include "sonotrack/kalman.hpp"
#include "sonotrack/model.hpp"
#include "sonotrack/mtfm.hpp"
#include "sonotrack/otcm.hpp"
#include "sonotrack/tensor.hpp"

namespace sonotrack {

// Zero-normalized cross-correlation of the template against windows of the
// search image on the stride grid, per scale; per-cell score is the best
// scale's NCC clipped to >= 0. An optional weight plane (same size as the
// template, >= 0) turns the statistics into weighted ones; the tracker feeds
// fused-template token norms through it. base_w/base_h are the previous box
// dimensions in search pixels; per-cell size estimates scale them by the
// winning scale.
inline ResponseMap ncc_response(const GrayImage& search, const GrayImage& tmpl,
                                int stride, const std::vector<double>& scales,
                                double base_w, double base_h,
                                const GrayImage* weight_plane = nullptr,
                                double scale_penalty = 1.0) {
  ResponseMap m;
  m.stride = stride;
  m.origin_x = 0.0;
  m.origin_y = 0.0;
  m.height = search.height / stride;
  m.width = search.width / stride;
  const size_t ncells = static_cast<size_t>(m.height) * m.width;
  m.scores.assign(ncells, 0.0);
  m.size_w.assign(ncells, base_w);
  m.size_h.assign(ncells, base_h);

  for (double s : scales) {
    const int ts = std::max(8, static_cast<int>(std::lround(tmpl.height * s)));
    const GrayImage t = resize_bilinear(tmpl, ts, ts);
    GrayImage w(ts, ts, 1.0);
    if (weight_plane) w = resize_bilinear(*weight_plane, ts, ts);
    double wsum = 0.0, wt = 0.0, wt2 = 0.0;
    for (int i = 0; i < ts * ts; ++i) {
      wsum += w.pixels[i];
      wt += w.pixels[i] * t.pixels[i];
      wt2 += w.pixels[i] * t.pixels[i] * t.pixels[i];
    }
    if (wsum <= 0.0) continue;
    const double mt = wt / wsum;
    const double vart = wt2 / wsum - mt * mt;
    if (vart <= 1e-12) continue;  // zero-variance template matches nothing

    for (int ci = 0; ci < m.height; ++ci)
      for (int cj = 0; cj < m.width; ++cj) {
        const int cx = stride * cj;
        const int cy = stride * ci;
        const int x0 = cx - ts / 2;
        const int y0 = cy - ts / 2;
        double ww = 0.0, ww2 = 0.0, wtw = 0.0;
        for (int i = 0; i < ts; ++i) {
          const int yy = y0 + i;
          if (yy < 0 || yy >= search.height) continue;
          for (int j = 0; j < ts; ++j) {
            const int xx = x0 + j;
            if (xx < 0 || xx >= search.width) continue;
            const double wij = w.at(i, j);
            const double pv = search.at(yy, xx);
            ww += wij * pv;
            ww2 += wij * pv * pv;
            wtw += wij * t.at(i, j) * pv;
          }
        }
        const double mw = ww / wsum;
        const double varw = ww2 / wsum - mw * mw;
        if (varw <= 1e-12) continue;
        const double cov = wtw / wsum - mt * mw;
        // changing the scale must clearly beat the unit scale, so non-unit
        // scores carry a small penalty (prevents size drift on smooth blobs)
        const double penalty = (s == 1.0) ? 1.0 : scale_penalty;
        const double ncc = penalty * cov / std::sqrt(vart * varw);
        const size_t flat = static_cast<size_t>(ci) * m.width + cj;
        if (ncc > m.scores[flat]) {
          m.scores[flat] = ncc;
          m.size_w[flat] = base_w * s;
          m.size_h[flat] = base_h * s;
        }
      }
  }
  return m;
}

// Per-sequence mutable state. One instance per tracked sequence.
struct TrackerState {
  GrayImage fixed_template_img;
  GrayImage dynamic_template_img;
  GrayImage binary_template_img;
  FeatureTensor fixed_template_feat;
  FeatureTensor dynamic_template_feat;
  FeatureTensor binary_template_feat;
  FeatureTensor fused_template;
  BBox prev_box;
  double prev_target_mean_pixel = 0.0;
  KalmanState kalman;
  int frame_index = 0;
};

class Tracker {
 public:
  explicit Tracker(Model model) : model_(std::move(model)) {
    model_.cfg.validate();
  }

  const TrackerConfig& config() const { return model_.cfg; }
  TrackerConfig& config() { return model_.cfg; }
  const Model& model() const { return model_; }

  TrackerState init(const GrayImage& frame, const BBox& box) const {
    const TrackerConfig& c = model_.cfg;
    if (box.is_absent()) throw std::domain_error("tracker init: absent box");
    if (box.x < 0 || box.y < 0 || box.right() > frame.width ||
        box.bottom() > frame.height)
      throw std::domain_error("tracker init: box outside frame");
    const GrayImage enh = enhance(frame);
    TrackerState st;
    refresh_templates(st, enh, box, /*init_fixed=*/true);
    st.prev_box = box;
    st.prev_target_mean_pixel = mean_intensity_in_box(enh, box);
    st.kalman = kf_init(box, c.noise);
    st.frame_index = 0;
    return st;
  }

  BBox step(TrackerState& st, const GrayImage& frame) const {
    const TrackerConfig& c = model_.cfg;
    const GrayImage enh = enhance(frame);
    const CropResult crop = crop_resize(enh, st.prev_box, c.search_context, c.search_size);
    const double prev_w_s = st.prev_box.w * crop.map.scale;
    const double prev_h_s = st.prev_box.h * crop.map.scale;

    std::optional<GrayImage> weights;
    if (c.use_mtfm) weights = template_weight_plane(st);
    ResponseMap map = ncc_response(crop.patch, st.dynamic_template_img, c.stride,
                                   c.scales, prev_w_s, prev_h_s,
                                   weights ? &*weights : nullptr, c.scale_penalty);
    if (c.use_fem) apply_fem_modulation(map, crop.patch);

    auto [kpred, b_kf] = kf_predict(st.kalman, c.noise);
    st.kalman = kpred;

    const int mr_flat = map.argmax_flat();
    const BBox b_mr = map.box_at(mr_flat, prev_w_s, prev_h_s);
    BBox sel = b_mr;
    int sel_cell = mr_flat;
    if (c.use_otcm && st.frame_index >= c.warmup) {
      const GrayImage mask = binarize(crop.patch, st.prev_target_mean_pixel);
      const BBox prev_box_s = crop.map.to_crop(st.prev_box);
      const BBox b_kf_s = crop.map.to_crop(b_kf);
      std::vector<Candidate> cands = extract_candidates(map, prev_box_s, c.otcm_k);
      cands = score_candidates(std::move(cands), b_kf_s, mask);
      sel = correct(cands, b_mr, c.iob_thresh);
      if (!(sel == b_mr))
        for (const Candidate& cd : cands)
          if (cd.box == sel) {
            sel_cell = cd.cell;
            break;
          }
    }
    const double sel_score = map.scores[sel_cell];

    // Sub-cell localization: 1-D parabola fit through the neighbor scores.
    const auto [dx, dy] = subcell_offset(map, sel_cell);
    sel.x += dx * c.stride;
    sel.y += dy * c.stride;

    BBox out = clamp_into(crop.map.to_frame(sel), frame);
    st.kalman = kf_update(st.kalman, out, c.noise);
    ++st.frame_index;
    if (c.update_interval > 0 && st.frame_index % c.update_interval == 0 &&
        sel_score >= c.update_min_score) {
      refresh_templates(st, enh, out, /*init_fixed=*/false);
    }
    st.prev_target_mean_pixel = mean_intensity_in_box(enh, out);
    st.prev_box = out;
    return out;
  }

  GrayImage enhance(const GrayImage& frame) const {
    const TrackerConfig& c = model_.cfg;
    if (!c.use_enhance) return frame;
    return high_freq_enhance(frame, c.enhance_sigma, c.blur_ksize(), c.enhance_gain);
  }

 private:
  Model model_;

  static BBox clamp_into(BBox b, const GrayImage& frame) {
    b.w = std::clamp(b.w, 1.0, static_cast<double>(frame.width));
    b.h = std::clamp(b.h, 1.0, static_cast<double>(frame.height));
    b.x = std::clamp(b.x, 0.0, frame.width - b.w);
    b.y = std::clamp(b.y, 0.0, frame.height - b.h);
    return b;
  }

  void refresh_templates(TrackerState& st, const GrayImage& enh, const BBox& box,
                         bool init_fixed) const {
    const TrackerConfig& c = model_.cfg;
    const CropResult tc = crop_resize(enh, box, c.template_context, c.template_size);
    st.dynamic_template_img = tc.patch;
    st.binary_template_img = make_binary_template(tc.patch);
    st.dynamic_template_feat = patch_embed(tc.patch, c.stride, model_.embed);
    st.binary_template_feat = patch_embed(st.binary_template_img, c.stride, model_.embed);
    if (init_fixed) {
      st.fixed_template_img = tc.patch;
      st.fixed_template_feat = st.dynamic_template_feat;
    }
    if (c.use_mtfm)
      st.fused_template = mtfm_fuse(st.fixed_template_feat, st.dynamic_template_feat,
                                    st.binary_template_feat, model_.mtfm);
    else
      st.fused_template = st.fixed_template_feat;
  }

  // Fused-template token norms, normalized to mean 1, expanded to a pixel
  // weight plane over the template.
  GrayImage template_weight_plane(const TrackerState& st) const {
    const TrackerConfig& c = model_.cfg;
    const FeatureTensor& f = st.fused_template;
    std::vector<double> norms(static_cast<size_t>(f.height) * f.width, 0.0);
    double total = 0.0;
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) {
        double acc = 0.0;
        for (int ch = 0; ch < f.channels; ++ch) acc += f.at(ch, y, x) * f.at(ch, y, x);
        const double nrm = std::sqrt(acc);
        norms[static_cast<size_t>(y) * f.width + x] = nrm;
        total += nrm;
      }
    const double mean = total / norms.size();
    GrayImage plane(c.template_size, c.template_size, 1.0);
    if (mean <= 1e-12) return plane;
    for (int r = 0; r < c.template_size; ++r)
      for (int col = 0; col < c.template_size; ++col)
        plane.at(r, col) =
            norms[static_cast<size_t>(r / c.stride) * f.width + col / c.stride] / mean;
    return plane;
  }

  // Response-score modulation from the frequency enhancement block: each
  // cell's score is multiplied by 1 + tanh of the relative token-norm change
  // under fem_forward, clipped at zero.
  void apply_fem_modulation(ResponseMap& map, const GrayImage& search) const {
    const TrackerConfig& c = model_.cfg;
    const FeatureTensor x = patch_embed(search, c.stride, model_.embed);
    const FeatureTensor xf = fem_forward(x, model_.fem);
    for (int y = 0; y < x.height && y < map.height; ++y)
      for (int xx = 0; xx < x.width && xx < map.width; ++xx) {
        double n0 = 0.0, n1 = 0.0;
        for (int ch = 0; ch < x.channels; ++ch) {
          n0 += x.at(ch, y, xx) * x.at(ch, y, xx);
          n1 += xf.at(ch, y, xx) * xf.at(ch, y, xx);
        }
        const double delta = (std::sqrt(n1) - std::sqrt(n0)) / (std::sqrt(n0) + 1e-9);
        const double gain = std::max(0.0, 1.0 + std::tanh(delta));
        map.scores[static_cast<size_t>(y) * map.width + xx] *= gain;
      }
  }

  static std::pair<double, double> subcell_offset(const ResponseMap& m, int flat) {
    const int i = flat / m.width;
    const int j = flat % m.width;
    auto fit = [](double lo, double mid, double hi) -> double {
      const double denom = lo - 2.0 * mid + hi;
      if (denom >= -1e-12) return 0.0;  // not a proper peak
      double off = 0.5 * (lo - hi) / denom;
      return std::clamp(off, -0.5, 0.5);
    };
    double dx = 0.0, dy = 0.0;
    if (j > 0 && j + 1 < m.width)
      dx = fit(m.score_at(i, j - 1), m.score_at(i, j), m.score_at(i, j + 1));
    if (i > 0 && i + 1 < m.height)
      dy = fit(m.score_at(i - 1, j), m.score_at(i, j), m.score_at(i + 1, j));
    return {dx, dy};
  }
};

}  // namespace sonotrack
