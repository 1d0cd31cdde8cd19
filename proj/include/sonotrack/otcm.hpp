#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sonotrack/bbox.hpp"
#include "sonotrack/image.hpp"
#include "sonotrack/kalman.hpp"

namespace sonotrack {

constexpr double kIobGate = 0.6;
constexpr int kDefaultTopK = 5;

// Grid of matching scores over the search region. Cell (i, j) sits at
// pixel (origin_x + stride * j, origin_y + stride * i) in search coordinates.
// size_w/size_h carry the per-cell box size estimate; when empty the caller's
// previous box dimensions are used.
struct ResponseMap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;
  int stride = 16;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<double> size_w;
  std::vector<double> size_h;

  double score_at(int i, int j) const {
    return scores[static_cast<size_t>(i) * width + j];
  }
  double cell_x(int flat) const { return origin_x + stride * (flat % width); }
  double cell_y(int flat) const { return origin_y + stride * (flat / width); }

  BBox box_at(int flat, double fallback_w, double fallback_h) const {
    const double w = size_w.empty() ? fallback_w : size_w[flat];
    const double h = size_h.empty() ? fallback_h : size_h[flat];
    return BBox::from_center(cell_x(flat), cell_y(flat), w, h);
  }

  int argmax_flat() const {
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
      if (scores[i] > scores[best]) best = i;  // ties keep the lower index
    return best;
  }
};

struct Candidate {
  BBox box;
  double score = 0.0;       // raw response S
  double brightness = 0.0;  // R_np in [0, 1]
  double iou_score = 0.0;   // I_box = IoU(B_kf, box) * S
  int cell = -1;            // flat response-map index

  double combined() const { return iou_score * brightness; }
};

// Top-k raw scores over the flattened map, ties broken by lower flat index.
inline std::vector<Candidate> extract_candidates(const ResponseMap& m,
                                                 const BBox& prev_box, int k) {
  if (k < 1) throw std::invalid_argument("extract_candidates: k must be >= 1");
  const int n = static_cast<int>(m.scores.size());
  k = std::min(k, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (m.scores[a] != m.scores[b]) return m.scores[a] > m.scores[b];
    return a < b;
  });
  std::vector<Candidate> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    Candidate c;
    c.cell = idx[i];
    c.score = m.scores[idx[i]];
    c.box = m.box_at(idx[i], prev_box.w, prev_box.h);
    out.push_back(c);
  }
  return out;
}

// Attaches I_box = IoU(B_kf, B_c) * S and the binary-mask brightness response.
inline std::vector<Candidate> score_candidates(std::vector<Candidate> cands,
                                               const BBox& b_kf,
                                               const GrayImage& mask) {
  for (Candidate& c : cands) {
    c.iou_score = iou(b_kf, c.box) * c.score;
    c.brightness = mean_in_box(mask, c.box);
  }
  return cands;
}

// Picks B_m = argmax of the combined score, then suppresses it in favor of
// the max-response box B_mr when IoB(B_m, B_mr) exceeds the gate. Falls back
// to B_mr when no candidate overlaps the Kalman box at all.
inline BBox correct(const std::vector<Candidate>& cands, const BBox& b_mr,
                    double iob_thresh = kIobGate) {
  if (cands.empty()) throw std::domain_error("correct: empty candidate list");
  int best = -1;
  for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
    if (cands[i].combined() <= 0.0) continue;
    if (best < 0 || cands[i].combined() > cands[best].combined() ||
        (cands[i].combined() == cands[best].combined() &&
         cands[i].cell < cands[best].cell))
      best = i;
  }
  if (best < 0) return b_mr;
  const double i_m = iob(cands[best].box, b_mr);
  return i_m > iob_thresh ? b_mr : cands[best].box;
}

}  // namespace sonotrack
