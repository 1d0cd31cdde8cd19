#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "sonotrack/bbox.hpp"
#include "sonotrack/dataset.hpp"
#include "sonotrack/image_io.hpp"
#include "sonotrack/model.hpp"
#include "sonotrack/tracker.hpp"

namespace sonotrack {

constexpr int kPrecisionSamples = 51;   // thresholds 0..50 px
constexpr int kNormPrecSamples = 51;    // thresholds 0..0.5
constexpr int kSuccessSamples = 21;     // thresholds 0..1 step 0.05
constexpr double kPrThreshold = 20.0;

struct SeqMetrics {
  double pr = 0.0, npr = 0.0, sr = 0.0, op50 = 0.0, op75 = 0.0, f1 = 0.0;
  std::vector<double> precision_curve;  // fraction with dist <= tau
  std::vector<double> norm_prec_curve;  // fraction with norm dist <= tau
  std::vector<double> success_curve;    // fraction with IoU > theta
};

namespace detail {
inline double frame_iou(const BBox& pred, const BBox& gt) {
  if (pred.is_absent()) return 0.0;
  return iou(pred, gt);
}
inline double frame_dist(const BBox& pred, const BBox& gt) {
  if (pred.is_absent()) return std::numeric_limits<double>::infinity();
  return center_distance(pred, gt);
}
inline double frame_ndist(const BBox& pred, const BBox& gt) {
  if (pred.is_absent()) return std::numeric_limits<double>::infinity();
  return normalized_distance(pred, gt);
}
inline void check_lengths(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("metrics: pred/gt length mismatch");
}
}  // namespace detail

inline double precision_rate(const std::vector<BBox>& preds,
                             const std::vector<BBox>& gts,
                             double tau = kPrThreshold) {
  detail::check_lengths(preds, gts);
  long present = 0, hit = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].is_absent()) continue;
    ++present;
    if (detail::frame_dist(preds[i], gts[i]) <= tau) ++hit;
  }
  if (present == 0) {
    std::cerr << "warning: precision_rate over all-absent ground truth\n";
    return 0.0;
  }
  return 100.0 * hit / present;
}

// 100 x mean over 51 thresholds in [0, 0.5] of the fraction of GT-present
// frames whose box-normalized center error is within the threshold.
inline double normalized_precision_rate(const std::vector<BBox>& preds,
                                        const std::vector<BBox>& gts,
                                        std::vector<double>* curve = nullptr) {
  detail::check_lengths(preds, gts);
  std::vector<double> nd;
  for (size_t i = 0; i < gts.size(); ++i)
    if (!gts[i].is_absent()) nd.push_back(detail::frame_ndist(preds[i], gts[i]));
  std::vector<double> c(kNormPrecSamples, 0.0);
  if (!nd.empty()) {
    for (int k = 0; k < kNormPrecSamples; ++k) {
      const double tau = 0.5 * k / (kNormPrecSamples - 1);
      long hit = 0;
      for (double d : nd)
        if (d <= tau) ++hit;
      c[k] = static_cast<double>(hit) / nd.size();
    }
  }
  double mean = 0.0;
  for (double v : c) mean += v;
  mean /= kNormPrecSamples;
  if (curve) *curve = c;
  return 100.0 * mean;
}

// Success curve over 21 thresholds (strict IoU > theta); SR is 100 x its mean.
inline double success_rate(const std::vector<BBox>& preds,
                           const std::vector<BBox>& gts,
                           std::vector<double>* curve = nullptr) {
  detail::check_lengths(preds, gts);
  std::vector<double> ious;
  for (size_t i = 0; i < gts.size(); ++i)
    if (!gts[i].is_absent()) ious.push_back(detail::frame_iou(preds[i], gts[i]));
  std::vector<double> c(kSuccessSamples, 0.0);
  if (!ious.empty()) {
    for (int k = 0; k < kSuccessSamples; ++k) {
      const double theta = 0.05 * k;
      long hit = 0;
      for (double v : ious)
        if (v > theta) ++hit;
      c[k] = static_cast<double>(hit) / ious.size();
    }
  }
  double mean = 0.0;
  for (double v : c) mean += v;
  mean /= kSuccessSamples;
  if (curve) *curve = c;
  return 100.0 * mean;
}

inline double op_at(const std::vector<BBox>& preds, const std::vector<BBox>& gts,
                    double theta) {
  detail::check_lengths(preds, gts);
  long present = 0, hit = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].is_absent()) continue;
    ++present;
    if (detail::frame_iou(preds[i], gts[i]) > theta) ++hit;
  }
  if (present == 0) return 0.0;
  return 100.0 * hit / present;
}

// Frame rules: TP when GT present, a box is reported and IoU >= 0.5;
// FP when a box is reported but GT is absent or IoU < 0.5;
// FN when GT is present and no box is reported or IoU < 0.5.
inline double f1_score(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
  detail::check_lengths(preds, gts);
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    const bool reported = !preds[i].is_absent();
    if (gts[i].is_absent()) {
      if (reported) ++fp;
      continue;
    }
    if (!reported) {
      ++fn;
      continue;
    }
    const double v = iou(preds[i], gts[i]);
    if (v >= 0.5) {
      ++tp;
    } else {
      ++fp;
      ++fn;
    }
  }
  const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

inline SeqMetrics compute_metrics(const std::vector<BBox>& preds,
                                  const std::vector<BBox>& gts) {
  SeqMetrics m;
  m.pr = precision_rate(preds, gts);
  m.npr = normalized_precision_rate(preds, gts, &m.norm_prec_curve);
  m.sr = success_rate(preds, gts, &m.success_curve);
  m.op50 = op_at(preds, gts, 0.5);
  m.op75 = op_at(preds, gts, 0.75);
  m.f1 = f1_score(preds, gts);
  m.precision_curve.assign(kPrecisionSamples, 0.0);
  std::vector<double> dists;
  for (size_t i = 0; i < gts.size(); ++i)
    if (!gts[i].is_absent()) dists.push_back(detail::frame_dist(preds[i], gts[i]));
  if (!dists.empty())
    for (int k = 0; k < kPrecisionSamples; ++k) {
      long hit = 0;
      for (double d : dists)
        if (d <= static_cast<double>(k)) ++hit;
      m.precision_curve[k] = static_cast<double>(hit) / dists.size();
    }
  return m;
}

struct SeqResult {
  std::string name;
  SeqFormat format = SeqFormat::kSquare;
  std::vector<std::string> attributes;
  SeqMetrics metrics;
  bool skipped = false;
};

struct EvalResult {
  std::vector<SeqResult> sequences;
};

// One-pass evaluation: init on frame 1 with the ground-truth box, track every
// remaining frame once, never re-initialize. Frame 1 echoes the init box.
inline std::vector<BBox> track_sequence(const Tracker& tracker,
                                        const SequenceRecord& rec) {
  if (rec.annotations.empty() || rec.annotations.front().is_absent())
    throw std::runtime_error("sequence " + rec.name + ": absent ground truth at frame 1");
  std::vector<BBox> preds;
  preds.reserve(rec.frame_paths.size());
  GrayImage frame = read_image(rec.frame_paths[0]);
  TrackerState st = tracker.init(frame, rec.annotations.front());
  preds.push_back(rec.annotations.front());
  for (size_t i = 1; i < rec.frame_paths.size(); ++i) {
    frame = read_image(rec.frame_paths[i]);
    preds.push_back(tracker.step(st, frame));
  }
  return preds;
}

inline EvalResult run_ope(const std::vector<SequenceRecord>& dataset,
                          const Model& model, int workers = 0) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  EvalResult res;
  res.sequences.resize(dataset.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    const Tracker tracker(model);  // independent instance per worker
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= dataset.size()) break;
      SeqResult& r = res.sequences[i];
      r.name = dataset[i].name;
      r.format = dataset[i].format;
      r.attributes = dataset[i].attributes;
      if (dataset[i].annotations.empty() || dataset[i].annotations.front().is_absent()) {
        r.skipped = true;
        continue;
      }
      const std::vector<BBox> preds = track_sequence(tracker, dataset[i]);
      r.metrics = compute_metrics(preds, dataset[i].annotations);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const SeqResult& r : res.sequences)
    if (r.skipped)
      std::cerr << "warning: skipping sequence " << r.name
                << " (absent ground truth at frame 1)\n";
  return res;
}

// Scores precomputed trajectory files (<traj_root>/<seq>.txt, one box/line).
inline EvalResult evaluate_trajectories(const std::vector<SequenceRecord>& dataset,
                                        const std::filesystem::path& traj_root) {
  EvalResult res;
  for (const SequenceRecord& rec : dataset) {
    SeqResult r;
    r.name = rec.name;
    r.format = rec.format;
    r.attributes = rec.attributes;
    const std::filesystem::path tf = traj_root / (rec.name + ".txt");
    std::ifstream f(tf);
    if (!f) throw std::runtime_error("missing trajectory file: " + tf.string());
    std::vector<BBox> preds;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      preds.push_back(detail::parse_box_line(line, tf.string(), lineno));
    }
    if (preds.size() != rec.annotations.size())
      throw std::runtime_error(tf.string() + ": trajectory length mismatch");
    r.metrics = compute_metrics(preds, rec.annotations);
    res.sequences.push_back(r);
  }
  return res;
}

// ---------------------------------------------------------------------------
// report serialization (stable ordering, fixed 6-decimal formatting)

namespace detail {

struct Agg {
  int n = 0;
  SeqMetrics sum;
  Agg() {
    sum.precision_curve.assign(kPrecisionSamples, 0.0);
    sum.norm_prec_curve.assign(kNormPrecSamples, 0.0);
    sum.success_curve.assign(kSuccessSamples, 0.0);
  }
  void add(const SeqMetrics& m) {
    ++n;
    sum.pr += m.pr;
    sum.npr += m.npr;
    sum.sr += m.sr;
    sum.op50 += m.op50;
    sum.op75 += m.op75;
    sum.f1 += m.f1;
    for (int k = 0; k < kPrecisionSamples; ++k)
      sum.precision_curve[k] += m.precision_curve[k];
    for (int k = 0; k < kNormPrecSamples; ++k)
      sum.norm_prec_curve[k] += m.norm_prec_curve[k];
    for (int k = 0; k < kSuccessSamples; ++k)
      sum.success_curve[k] += m.success_curve[k];
  }
  SeqMetrics mean() const {
    SeqMetrics m = sum;
    if (n == 0) return m;
    m.pr /= n;
    m.npr /= n;
    m.sr /= n;
    m.op50 /= n;
    m.op75 /= n;
    m.f1 /= n;
    for (double& v : m.precision_curve) v /= n;
    for (double& v : m.norm_prec_curve) v /= n;
    for (double& v : m.success_curve) v /= n;
    return m;
  }
};

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void write_scalar_row(std::ostream& os, const SeqMetrics& m) {
  os << "pr " << fmt6(m.pr) << " npr " << fmt6(m.npr) << " sr " << fmt6(m.sr)
     << " op50 " << fmt6(m.op50) << " op75 " << fmt6(m.op75) << " f1 "
     << fmt6(m.f1) << "\n";
}

inline void write_curves(std::ostream& os, const std::string& prefix,
                         const SeqMetrics& m) {
  os << prefix << ".curve.success";
  for (double v : m.success_curve) os << " " << fmt6(v);
  os << "\n" << prefix << ".curve.precision";
  for (double v : m.precision_curve) os << " " << fmt6(v);
  os << "\n" << prefix << ".curve.norm_precision";
  for (double v : m.norm_prec_curve) os << " " << fmt6(v);
  os << "\n";
}

}  // namespace detail

inline void write_report(const EvalResult& res, std::ostream& os) {
  using detail::Agg;
  std::vector<const SeqResult*> rows;
  for (const SeqResult& r : res.sequences)
    if (!r.skipped) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(),
            [](const SeqResult* a, const SeqResult* b) { return a->name < b->name; });

  os << "SONOTRACK-REPORT v1\n";
  os << "sequences " << rows.size() << "\n";
  Agg all, square, fan;
  std::map<std::string, Agg> by_attr;
  for (const SeqResult* r : rows) {
    os << "seq " << r->name << " "
       << (r->format == SeqFormat::kFan ? "fan" : "square") << " ";
    detail::write_scalar_row(os, r->metrics);
    all.add(r->metrics);
    (r->format == SeqFormat::kFan ? fan : square).add(r->metrics);
    for (const std::string& a : r->attributes) by_attr[a].add(r->metrics);
  }
  os << "aggregate all " << all.n << " ";
  detail::write_scalar_row(os, all.mean());
  os << "aggregate square " << square.n << " ";
  detail::write_scalar_row(os, square.mean());
  os << "aggregate fan " << fan.n << " ";
  detail::write_scalar_row(os, fan.mean());
  for (const auto& [code, agg] : by_attr) {
    os << "attribute " << code << " " << agg.n << " ";
    detail::write_scalar_row(os, agg.mean());
  }
  detail::write_curves(os, "all", all.mean());
}

inline void write_curves_csv(const EvalResult& res, std::ostream& os) {
  detail::Agg all;
  for (const SeqResult& r : res.sequences)
    if (!r.skipped) all.add(r.metrics);
  const SeqMetrics m = all.mean();
  os << "curve,threshold,value\n";
  for (int k = 0; k < kSuccessSamples; ++k)
    os << "success," << detail::fmt6(0.05 * k) << "," << detail::fmt6(m.success_curve[k]) << "\n";
  for (int k = 0; k < kPrecisionSamples; ++k)
    os << "precision," << detail::fmt6(k) << "," << detail::fmt6(m.precision_curve[k]) << "\n";
  for (int k = 0; k < kNormPrecSamples; ++k)
    os << "norm_precision," << detail::fmt6(0.5 * k / (kNormPrecSamples - 1)) << ","
       << detail::fmt6(m.norm_prec_curve[k]) << "\n";
}

}  // namespace sonotrack
