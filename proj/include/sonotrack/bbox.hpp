#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sonotrack {

// Axis-aligned box in pixel units, half-open rectangle [x, x+w) x [y, y+h).
// The all-zero box is the out-of-view sentinel used by annotation files.
struct BBox {
  double x = 0.0;  // left
  double y = 0.0;  // top
  double w = 0.0;
  double h = 0.0;

  bool is_absent() const { return x == 0.0 && y == 0.0 && w == 0.0 && h == 0.0; }
  double area() const { return w * h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  static BBox from_center(double cx, double cy, double w, double h) {
    return BBox{cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  bool operator==(const BBox& o) const {
    return x == o.x && y == o.y && w == o.w && h == o.h;
  }
};

namespace detail {
inline void require_present(const BBox& a, const BBox& b) {
  if (a.is_absent() || b.is_absent())
    throw std::domain_error("overlap measure on absent (0,0,0,0) box");
}
}  // namespace detail

inline double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double iou(const BBox& a, const BBox& b) {
  detail::require_present(a, b);
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

inline double giou(const BBox& a, const BBox& b) {
  detail::require_present(a, b);
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double hw = std::max(a.right(), b.right()) - std::min(a.x, b.x);
  const double hh = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
  const double hull = hw * hh;
  const double i = uni > 0.0 ? inter / uni : 0.0;
  if (hull <= 0.0) return i;
  return i - (hull - uni) / hull;
}

// Intersection over the area of the SECOND box (asymmetric).
inline double iob(const BBox& a, const BBox& b) {
  detail::require_present(a, b);
  if (b.area() <= 0.0) throw std::domain_error("iob: zero-area second box");
  return intersection_area(a, b) / b.area();
}

inline double center_distance(const BBox& a, const BBox& b) {
  detail::require_present(a, b);
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

// Center offset normalized by the ground-truth box dimensions.
inline double normalized_distance(const BBox& pred, const BBox& gt) {
  if (gt.is_absent()) throw std::domain_error("normalized_distance: absent gt");
  if (gt.w <= 0.0 || gt.h <= 0.0)
    throw std::domain_error("normalized_distance: degenerate gt");
  return std::hypot((pred.cx() - gt.cx()) / gt.w, (pred.cy() - gt.cy()) / gt.h);
}

}  // namespace sonotrack
