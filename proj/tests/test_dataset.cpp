#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sonotrack/dataset.hpp"

using namespace sonotrack;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("sonotrack_ds_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(ParseBoxLine, AcceptsValidAndRejectsMalformed) {
  const BBox b = detail::parse_box_line("1.5,2,3.25,4", "gt.txt", 1);
  EXPECT_DOUBLE_EQ(b.x, 1.5);
  EXPECT_DOUBLE_EQ(b.w, 3.25);
  EXPECT_THROW(detail::parse_box_line("1,2,3", "gt.txt", 7), std::runtime_error);
  EXPECT_THROW(detail::parse_box_line("1;2;3;4", "gt.txt", 7), std::runtime_error);
  EXPECT_THROW(detail::parse_box_line("a,b,c,d", "gt.txt", 7), std::runtime_error);
  try {
    detail::parse_box_line("1,2,3", "gt.txt", 7);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("gt.txt:7"), std::string::npos);
  }
}

TEST(SynthGenerate, RoundTripsGroundTruthExactly) {
  TempDir tmp;
  SynthSpec spec;
  spec.frames = 12;
  spec.seed = 5;
  const SequenceRecord gen = synth_generate(spec, tmp.path(), "seq");
  const SequenceRecord loaded = load_sequence(tmp.path() / "seq");
  ASSERT_EQ(loaded.annotations.size(), gen.annotations.size());
  for (size_t i = 0; i < gen.annotations.size(); ++i) {
    EXPECT_EQ(loaded.annotations[i].x, gen.annotations[i].x);
    EXPECT_EQ(loaded.annotations[i].y, gen.annotations[i].y);
    EXPECT_EQ(loaded.annotations[i].w, gen.annotations[i].w);
    EXPECT_EQ(loaded.annotations[i].h, gen.annotations[i].h);
  }
  EXPECT_EQ(loaded.attributes, gen.attributes);
  EXPECT_EQ(loaded.format, SeqFormat::kSquare);
  EXPECT_EQ(loaded.frame_paths.size(), 12u);
}

TEST(SynthGenerate, DeterministicPixelsForFixedSeed) {
  TempDir tmp;
  SynthSpec spec;
  spec.frames = 6;
  spec.speckle_sigma = 0.2;
  spec.salt_pepper_rate = 0.02;
  spec.seed = 9;
  synth_generate(spec, tmp.path(), "a");
  synth_generate(spec, tmp.path(), "b");
  for (int t = 1; t <= 6; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.pgm", t);
    const GrayImage ia = read_pgm((tmp.path() / "a" / "imgs" / name).string());
    const GrayImage ib = read_pgm((tmp.path() / "b" / "imgs" / name).string());
    EXPECT_EQ(ia.pixels, ib.pixels);
  }
}

TEST(SynthGenerate, MarksAbsentFramesWhenTargetLeavesView) {
  TempDir tmp;
  SynthSpec spec;
  spec.frames = 30;
  spec.start_x = 140.0;
  spec.vel_x = 5.0;  // walks off the right edge
  const SequenceRecord rec = synth_generate(spec, tmp.path(), "seq");
  EXPECT_FALSE(rec.annotations.front().is_absent());
  EXPECT_TRUE(rec.annotations.back().is_absent());
  // the loader reads absent rows back as the zero sentinel
  const SequenceRecord loaded = load_sequence(tmp.path() / "seq");
  EXPECT_TRUE(loaded.annotations.back().is_absent());
}

TEST(SynthGenerate, AttributeDerivation) {
  TempDir tmp;
  SynthSpec ghost;
  ghost.frames = 8;
  ghost.ghost = true;
  const SequenceRecord rec_ao = synth_generate(ghost, tmp.path(), "g");
  EXPECT_NE(std::find(rec_ao.attributes.begin(), rec_ao.attributes.end(), "AOC"),
            rec_ao.attributes.end());

  SynthSpec tiny;
  tiny.frames = 8;
  tiny.sigma_x = 2.0;
  tiny.sigma_y = 2.0;  // box side ~8.6 < 15 on every frame
  const SequenceRecord rec_t = synth_generate(tiny, tmp.path(), "t");
  EXPECT_NE(std::find(rec_t.attributes.begin(), rec_t.attributes.end(), "ST"),
            rec_t.attributes.end());

  SynthSpec grow;
  grow.frames = 12;
  grow.scale_growth = 1.08;  // area ratio passes 2x
  const SequenceRecord rec_g = synth_generate(grow, tmp.path(), "sv");
  EXPECT_NE(std::find(rec_g.attributes.begin(), rec_g.attributes.end(), "SV"),
            rec_g.attributes.end());

  SynthSpec drift;
  drift.frames = 12;
  drift.range_drift = 1.0;  // peak halves across the sequence -> TBC
  const SequenceRecord rec_d = synth_generate(drift, tmp.path(), "tbc");
  EXPECT_NE(std::find(rec_d.attributes.begin(), rec_d.attributes.end(), "TBC"),
            rec_d.attributes.end());

  SynthSpec plain;
  plain.frames = 8;
  const SequenceRecord rec_p = synth_generate(plain, tmp.path(), "p");
  EXPECT_EQ(std::find(rec_p.attributes.begin(), rec_p.attributes.end(), "AOC"),
            rec_p.attributes.end());
  EXPECT_EQ(std::find(rec_p.attributes.begin(), rec_p.attributes.end(), "TBC"),
            rec_p.attributes.end());
}

TEST(BlobGtBox, TenPercentContour) {
  const BBox b = blob_gt_box(50.0, 60.0, 8.0, 6.0);
  const double kx = 8.0 * std::sqrt(2.0 * std::log(10.0));
  EXPECT_NEAR(b.cx(), 50.0, 0.01);
  EXPECT_NEAR(b.cy(), 60.0, 0.01);
  EXPECT_NEAR(b.w, 2 * kx, 0.01);
  // values are quantized to 2 decimals
  EXPECT_DOUBLE_EQ(b.x, std::round(b.x * 100.0) / 100.0);
}

TEST(LoadSequence, ErrorsAreDescriptive) {
  TempDir tmp;
  const fs::path dir = tmp.path() / "broken";
  fs::create_directories(dir / "imgs");
  // two frames, one gt row -> count mismatch naming the file
  write_pgm(GrayImage(8, 8, 0.0), (dir / "imgs" / "000001.pgm").string());
  write_pgm(GrayImage(8, 8, 0.0), (dir / "imgs" / "000002.pgm").string());
  std::ofstream(dir / "groundtruth.txt") << "1,1,4,4\n";
  try {
    load_sequence(dir);
    FAIL() << "expected count mismatch";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("groundtruth.txt"), std::string::npos);
    EXPECT_NE(msg.find("expected 2"), std::string::npos);
  }
  EXPECT_THROW(load_sequence(tmp.path() / "missing"), std::runtime_error);
}

TEST(LoadSequence, FramesSortedLexicographically) {
  TempDir tmp;
  const fs::path dir = tmp.path() / "seq";
  fs::create_directories(dir / "imgs");
  std::ofstream gt(dir / "groundtruth.txt");
  for (const char* n : {"000003.pgm", "000001.pgm", "000002.pgm"}) {
    write_pgm(GrayImage(8, 8, 0.0), (dir / "imgs" / n).string());
    gt << "1,1,2,2\n";
  }
  gt.close();
  const SequenceRecord rec = load_sequence(dir);
  ASSERT_EQ(rec.frame_paths.size(), 3u);
  EXPECT_TRUE(rec.frame_paths[0].ends_with("000001.pgm"));
  EXPECT_TRUE(rec.frame_paths[2].ends_with("000003.pgm"));
}

TEST(LoadDataset, SortedByNameAndFanMetaHonored) {
  TempDir tmp;
  SynthSpec sq;
  sq.frames = 4;
  SynthSpec fan = sq;
  fan.format = SeqFormat::kFan;
  synth_generate(fan, tmp.path(), "b_fan");
  synth_generate(sq, tmp.path(), "a_sq");
  const std::vector<SequenceRecord> ds = load_dataset(tmp.path());
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].name, "a_sq");
  EXPECT_EQ(ds[1].name, "b_fan");
  EXPECT_EQ(ds[0].format, SeqFormat::kSquare);
  EXPECT_EQ(ds[1].format, SeqFormat::kFan);
  EXPECT_THROW(load_dataset(tmp.path() / "empty_nonexistent"), std::exception);
}

TEST(PolarToFan, ConstantImageFillsWedgeOnly) {
  GrayImage sq(100, 100, 200.0);
  const GrayImage fan = polar_to_fan(sq, 90.0, 0.0);
  // canvas: width = 2 R sin(45deg) ~ 141, height = R = 100
  EXPECT_EQ(fan.width, 141);
  EXPECT_EQ(fan.height, 100);
  const double half = M_PI / 4.0;
  int inside = 0, filled = 0;
  for (int r = 0; r < fan.height; ++r)
    for (int c = 0; c < fan.width; ++c) {
      const double x = (c + 0.5) - 0.5 * fan.width;
      const double y = fan.height - (r + 0.5);
      const bool in_wedge =
          std::hypot(x, y) <= 98.0 && std::abs(std::atan2(x, y)) < half - 0.02;
      if (in_wedge) {
        ++inside;
        if (fan.at(r, c) > 150.0) ++filled;
      }
      const bool outside =
          std::hypot(x, y) > 102.0 || std::abs(std::atan2(x, y)) > half + 0.02;
      if (outside) EXPECT_DOUBLE_EQ(fan.at(r, c), 0.0);
    }
  // interior of the wedge carries the source intensity
  EXPECT_GT(filled, inside * 99 / 100);
}

TEST(PolarToFan, WedgeAreaMatchesSectorFormula) {
  GrayImage sq(200, 200, 255.0);
  const double fov = 130.0;
  const GrayImage fan = polar_to_fan(sq, fov, 0.0);
  int nonzero = 0;
  for (double p : fan.pixels)
    if (p > 0.0) ++nonzero;
  const double expect = 0.5 * (fov * M_PI / 180.0) * 200.0 * 200.0;
  EXPECT_NEAR(nonzero, expect, 0.02 * expect);
}

TEST(PolarToFan, SingleBeamMapsToItsAngle) {
  // light up one beam column; it must appear along the matching ray
  GrayImage sq(120, 90, 0.0);
  const int beam = 70;  // right of center -> positive angle
  for (int r = 0; r < 120; ++r) sq.at(r, beam) = 255.0;
  const double fov = 90.0;
  const GrayImage fan = polar_to_fan(sq, fov, 0.0);
  const double theta = (double(beam) / 89.0 - 0.5) * fov * M_PI / 180.0;
  // sample along the ray at several ranges
  for (double rho : {40.0, 70.0, 100.0}) {
    const double x = rho * std::sin(theta) + 0.5 * fan.width;
    const double y = fan.height - rho * std::cos(theta);
    const int c = static_cast<int>(x);
    const int r = static_cast<int>(y);
    double best = 0.0;
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc)
        if (r + dr >= 0 && r + dr < fan.height && c + dc >= 0 && c + dc < fan.width)
          best = std::max(best, fan.at(r + dr, c + dc));
    EXPECT_GT(best, 100.0) << "rho " << rho;
  }
}

TEST(PolarToFan, RejectsBadArgs) {
  GrayImage sq(10, 10, 0.0);
  EXPECT_THROW(polar_to_fan(sq, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(polar_to_fan(sq, 200.0, 0.0), std::invalid_argument);
  EXPECT_THROW(polar_to_fan(sq, 90.0, 1.0), std::invalid_argument);
}

TEST(SynthSpec, Validation) {
  SynthSpec s;
  s.frames = 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = SynthSpec{};
  s.salt_pepper_rate = 1.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = SynthSpec{};
  s.speckle_sigma = -0.1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(SynthSpec{}.validate());
}
