#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonotrack/bbox.hpp"
#include "sonotrack/image.hpp"
#include "sonotrack/image_io.hpp"
#include "sonotrack/rng.hpp"

namespace sonotrack {

enum class SeqFormat { kSquare, kFan };
enum class MotionKind { kLinear, kSinusoidal, kCrossover };

struct SequenceRecord {
  std::string name;
  std::vector<std::string> frame_paths;
  std::vector<BBox> annotations;
  std::vector<std::string> attributes;
  SeqFormat format = SeqFormat::kSquare;
};

// Knobs of the synthetic sonar-sequence generator. The target is an
// anisotropic Gaussian blob; its ground-truth box is the bounding rectangle
// of the 10%-of-peak isocontour.
struct SynthSpec {
  int frames = 40;
  int image_size = 160;
  MotionKind motion = MotionKind::kLinear;
  double target_intensity = 200.0;  // blob peak before range attenuation
  double salt_pepper_rate = 0.0;
  double speckle_sigma = 0.0;
  // blob geometry
  double sigma_x = 8.0;
  double sigma_y = 6.0;
  double scale_growth = 1.0;  // per-frame multiplicative size change
  // motion parameters
  double start_x = 50.0;
  double start_y = 80.0;
  double vel_x = 1.5;
  double vel_y = 0.0;
  double sin_amp = 20.0;
  double sin_period = 40.0;
  // simulated range drift; peak_t = target_intensity / (1 + range_drift*t/frames)
  double range_drift = 0.0;
  // optional acoustic ghost echo
  bool ghost = false;
  double ghost_dx = 24.0;
  double ghost_dy = 0.0;
  double ghost_gain = 0.5;
  // optional crossing distractor blob
  bool distractor = false;
  double distractor_gain = 1.0;
  SeqFormat format = SeqFormat::kSquare;
  double fan_fov_deg = 130.0;
  std::string image_ext = "pgm";
  std::uint64_t seed = 1;

  void validate() const {
    if (frames < 2) throw std::invalid_argument("synth: frames must be >= 2");
    if (salt_pepper_rate < 0.0 || salt_pepper_rate > 1.0)
      throw std::invalid_argument("synth: salt_pepper_rate must be in [0,1]");
    if (speckle_sigma < 0.0)
      throw std::invalid_argument("synth: speckle_sigma must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// loading

namespace detail {
inline BBox parse_box_line(const std::string& line, const std::string& file, int lineno) {
  std::istringstream ss(line);
  double v[4];
  char comma;
  for (int i = 0; i < 4; ++i) {
    if (i > 0 && (!(ss >> comma) || comma != ','))
      throw std::runtime_error(file + ":" + std::to_string(lineno) + ": malformed box line");
    if (!(ss >> v[i]))
      throw std::runtime_error(file + ":" + std::to_string(lineno) + ": malformed box line");
  }
  return BBox{v[0], v[1], v[2], v[3]};
}
}  // namespace detail

// Layout: <dir>/imgs/*.png|pgm (lexicographic order), <dir>/groundtruth.txt,
// optional attributes.txt (one comma-separated line) and meta.txt (key=value).
inline SequenceRecord load_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SequenceRecord rec;
  rec.name = dir.filename().string();
  const fs::path imgs = dir / "imgs";
  if (!fs::is_directory(imgs))
    throw std::runtime_error("sequence dir missing imgs/: " + dir.string());
  for (const auto& e : fs::directory_iterator(imgs)) {
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".pgm") rec.frame_paths.push_back(e.path().string());
  }
  std::sort(rec.frame_paths.begin(), rec.frame_paths.end());
  if (rec.frame_paths.empty())
    throw std::runtime_error("sequence has no frames: " + dir.string());

  const fs::path gt = dir / "groundtruth.txt";
  std::ifstream f(gt);
  if (!f) throw std::runtime_error("missing groundtruth file: " + gt.string());
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    rec.annotations.push_back(detail::parse_box_line(line, gt.string(), lineno));
  }
  if (rec.annotations.size() != rec.frame_paths.size())
    throw std::runtime_error(gt.string() + ": expected " +
                             std::to_string(rec.frame_paths.size()) + " boxes, got " +
                             std::to_string(rec.annotations.size()));

  std::ifstream af(dir / "attributes.txt");
  if (af && std::getline(af, line)) {
    std::istringstream ss(line);
    std::string code;
    while (std::getline(ss, code, ','))
      if (!code.empty()) rec.attributes.push_back(code);
  }
  std::ifstream mf(dir / "meta.txt");
  while (mf && std::getline(mf, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (line.substr(0, eq) == "format" && line.substr(eq + 1) == "fan")
      rec.format = SeqFormat::kFan;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// polar fan remap

// Rows of the square image are range bins (row 0 nearest), columns are beam
// angles across the field of view. The output canvas bounds the fan exactly;
// pixels outside the fan are 0. The apex sits at the bottom center.
inline GrayImage polar_to_fan(const GrayImage& square, double fov_deg,
                              double r_frac_min) {
  if (fov_deg <= 0.0 || fov_deg > 180.0)
    throw std::invalid_argument("polar_to_fan: fov must be in (0, 180]");
  if (r_frac_min < 0.0 || r_frac_min >= 1.0)
    throw std::invalid_argument("polar_to_fan: r_frac_min must be in [0, 1)");
  const double fov = fov_deg * M_PI / 180.0;
  const double R = static_cast<double>(square.height);
  const double r_min = r_frac_min * R;
  const double half = 0.5 * fov;
  const double y_min = r_min * std::cos(half);
  const int out_w = static_cast<int>(std::lround(2.0 * R * std::sin(half)));
  const int out_h = static_cast<int>(std::lround(R - y_min));
  GrayImage out(out_h, out_w);
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      const double x = (c + 0.5) - 0.5 * out_w;
      const double y = (R - y_min) - (r + 0.5) + y_min;  // distance above apex
      const double rho = std::hypot(x, y);
      const double theta = std::atan2(x, y);
      if (rho < r_min || rho > R || std::abs(theta) > half) continue;
      const double row_s =
          (rho / R - r_frac_min) / (1.0 - r_frac_min) * (square.height - 1);
      const double col_s = (theta / fov + 0.5) * (square.width - 1);
      out.at(r, c) = sample_bilinear(square, col_s + 0.5, row_s + 0.5);
    }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic generation

namespace detail {

struct BlobState {
  double cx, cy, sx, sy, peak;
};

inline BlobState blob_at(const SynthSpec& s, int t) {
  BlobState b;
  switch (s.motion) {
    case MotionKind::kLinear:
    case MotionKind::kCrossover:
      b.cx = s.start_x + s.vel_x * t;
      b.cy = s.start_y + s.vel_y * t;
      break;
    case MotionKind::kSinusoidal:
      b.cx = s.start_x + s.vel_x * t;
      b.cy = s.start_y + s.sin_amp * std::sin(2.0 * M_PI * t / s.sin_period);
      break;
  }
  const double growth = std::pow(s.scale_growth, t);
  b.sx = s.sigma_x * growth;
  b.sy = s.sigma_y * growth;
  b.peak = s.target_intensity / (1.0 + s.range_drift * static_cast<double>(t) / s.frames);
  return b;
}

inline void render_blob(GrayImage& img, double cx, double cy, double sx,
                        double sy, double peak) {
  const int c0 = std::max(0, static_cast<int>(cx - 4 * sx));
  const int c1 = std::min(img.width - 1, static_cast<int>(cx + 4 * sx));
  const int r0 = std::max(0, static_cast<int>(cy - 4 * sy));
  const int r1 = std::min(img.height - 1, static_cast<int>(cy + 4 * sy));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double dx = (c + 0.5) - cx;
      const double dy = (r + 0.5) - cy;
      img.at(r, c) +=
          peak * std::exp(-(dx * dx / (2 * sx * sx) + dy * dy / (2 * sy * sy)));
    }
}

// Zero out everything outside the fan wedge (apex bottom center).
inline void apply_fan_mask(GrayImage& img, double fov_deg) {
  const double half = 0.5 * fov_deg * M_PI / 180.0;
  const double R = static_cast<double>(img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const double x = (c + 0.5) - 0.5 * img.width;
      const double y = img.height - (r + 0.5);
      if (std::abs(std::atan2(x, y)) > half || std::hypot(x, y) > R)
        img.at(r, c) = 0.0;
    }
}

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace detail

// Ground-truth box of a blob: bounding rectangle of the 10%-of-peak
// isocontour, clipped against nothing (boxes may extend past the frame).
inline BBox blob_gt_box(double cx, double cy, double sx, double sy) {
  const double kx = sx * std::sqrt(2.0 * std::log(10.0));
  const double ky = sy * std::sqrt(2.0 * std::log(10.0));
  return BBox{detail::round2(cx - kx), detail::round2(cy - ky),
              detail::round2(2 * kx), detail::round2(2 * ky)};
}

// Renders the sequence into <out_root>/<name>/ and returns the record.
inline SequenceRecord synth_generate(const SynthSpec& spec,
                                     const std::filesystem::path& out_root,
                                     const std::string& name) {
  namespace fs = std::filesystem;
  spec.validate();
  const fs::path dir = out_root / name;
  fs::create_directories(dir / "imgs");
  Rng rng(spec.seed);

  SequenceRecord rec;
  rec.name = name;
  rec.format = spec.format;

  std::vector<double> peaks;
  for (int t = 0; t < spec.frames; ++t) {
    const detail::BlobState b = detail::blob_at(spec, t);
    peaks.push_back(b.peak);
    GrayImage img(spec.image_size, spec.image_size);
    detail::render_blob(img, b.cx, b.cy, b.sx, b.sy, b.peak);
    if (spec.ghost)
      detail::render_blob(img, b.cx + spec.ghost_dx, b.cy + spec.ghost_dy, b.sx,
                          b.sy, b.peak * spec.ghost_gain);
    if (spec.distractor && spec.motion == MotionKind::kCrossover) {
      // crosses the target's path around mid-sequence, moving the other way
      const double dx = spec.start_x + spec.vel_x * (spec.frames - 1 - t);
      const double dy = b.cy + 0.9 * (t - spec.frames / 2.0);
      detail::render_blob(img, dx, dy, b.sx, b.sy, b.peak * spec.distractor_gain);
    }
    if (spec.speckle_sigma > 0.0)
      for (double& p : img.pixels) p *= std::max(0.0, 1.0 + spec.speckle_sigma * rng.normal());
    if (spec.salt_pepper_rate > 0.0)
      for (double& p : img.pixels) {
        const double u = rng.next_double();
        if (u < 0.5 * spec.salt_pepper_rate) p = 0.0;
        else if (u < spec.salt_pepper_rate) p = 255.0;
      }
    if (spec.format == SeqFormat::kFan) detail::apply_fan_mask(img, spec.fan_fov_deg);

    char fname[32];
    std::snprintf(fname, sizeof(fname), "%06d.%s", t + 1, spec.image_ext.c_str());
    const fs::path fpath = dir / "imgs" / fname;
    write_image(quantize(img), fpath.string());
    rec.frame_paths.push_back(fpath.string());

    BBox gt = blob_gt_box(b.cx, b.cy, b.sx, b.sy);
    if (gt.right() <= 0 || gt.bottom() <= 0 || gt.x >= spec.image_size ||
        gt.y >= spec.image_size)
      gt = BBox{};  // out of view
    rec.annotations.push_back(gt);
  }

  // attribute auto-derivation from the written ground truth
  bool st = true, sv = false;
  const BBox& first = rec.annotations.front();
  for (const BBox& b : rec.annotations) {
    if (b.is_absent()) continue;
    if (!(b.w < 15.0 && b.h < 15.0)) st = false;
    if (!first.is_absent() && first.area() > 0) {
      const double ratio = b.area() / first.area();
      if (ratio < 0.5 || ratio > 2.0) sv = true;
    }
  }
  if (st) rec.attributes.push_back("ST");
  if (sv) rec.attributes.push_back("SV");
  if (spec.ghost) rec.attributes.push_back("AOC");
  if (spec.distractor) rec.attributes.push_back("SO");
  double pmin = peaks[0], pmax = peaks[0];
  for (double p : peaks) {
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
  }
  if (pmin > 0 && pmax / pmin > 1.5) rec.attributes.push_back("TBC");

  std::ofstream gtf(dir / "groundtruth.txt");
  for (const BBox& b : rec.annotations) {
    char line[128];
    std::snprintf(line, sizeof(line), "%.2f,%.2f,%.2f,%.2f\n", b.x, b.y, b.w, b.h);
    gtf << line;
  }
  std::ofstream af(dir / "attributes.txt");
  for (size_t i = 0; i < rec.attributes.size(); ++i)
    af << (i ? "," : "") << rec.attributes[i];
  af << "\n";
  std::ofstream mf(dir / "meta.txt");
  mf << "format=" << (spec.format == SeqFormat::kFan ? "fan" : "square") << "\n";
  mf << "seed=" << spec.seed << "\n";
  return rec;
}

inline std::vector<SequenceRecord> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "groundtruth.txt"))
      names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::vector<SequenceRecord> out;
  for (const std::string& n : names) out.push_back(load_sequence(root / n));
  if (out.empty()) throw std::runtime_error("no sequences found under " + root.string());
  return out;
}

}  // namespace sonotrack
