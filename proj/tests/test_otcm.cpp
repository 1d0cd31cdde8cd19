#include <gtest/gtest.h>

#include "sonotrack/otcm.hpp"
#include "sonotrack/rng.hpp"

using namespace sonotrack;

namespace {

ResponseMap random_map(Rng& rng, int h, int w) {
  ResponseMap m;
  m.height = h;
  m.width = w;
  m.stride = 16;
  m.origin_x = 8.0;
  m.origin_y = 8.0;
  m.scores.resize(static_cast<size_t>(h) * w);
  for (double& s : m.scores) s = rng.uniform(0.0, 1.0);
  return m;
}

// Straight-line reference for the whole correction step: enumerate every
// cell, attach scores, pick the combined argmax, apply the IoB gate.
BBox correct_reference(const ResponseMap& m, const BBox& prev, const BBox& b_kf,
                       const GrayImage& mask, int k, double gate) {
  struct Item {
    int cell;
    double score;
  };
  std::vector<Item> items;
  for (int i = 0; i < static_cast<int>(m.scores.size()); ++i)
    items.push_back({i, m.scores[i]});
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.score > b.score;
  });
  items.resize(std::min<size_t>(k, items.size()));

  const BBox b_mr = m.box_at(m.argmax_flat(), prev.w, prev.h);
  int best_cell = -1;
  double best_combined = 0.0;
  BBox best_box;
  for (const Item& it : items) {
    const BBox box = m.box_at(it.cell, prev.w, prev.h);
    const double combined = iou(b_kf, box) * it.score * mean_in_box(mask, box);
    if (combined <= 0.0) continue;
    if (best_cell < 0 || combined > best_combined ||
        (combined == best_combined && it.cell < best_cell)) {
      best_cell = it.cell;
      best_combined = combined;
      best_box = box;
    }
  }
  if (best_cell < 0) return b_mr;
  return iob(best_box, b_mr) > gate ? b_mr : best_box;
}

GrayImage random_mask(Rng& rng, int h, int w) {
  GrayImage mask(h, w);
  for (double& p : mask.pixels) p = (rng.next_u64() % 2) ? 255.0 : 0.0;
  return mask;
}

bool same_box(const BBox& a, const BBox& b) {
  return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

}  // namespace

TEST(ResponseMap, CellGeometryAndArgmax) {
  ResponseMap m;
  m.height = 2;
  m.width = 3;
  m.stride = 16;
  m.origin_x = 4.0;
  m.origin_y = 6.0;
  m.scores = {0.1, 0.9, 0.3, 0.9, 0.2, 0.0};
  EXPECT_DOUBLE_EQ(m.cell_x(4), 4.0 + 16.0);
  EXPECT_DOUBLE_EQ(m.cell_y(4), 6.0 + 16.0);
  EXPECT_EQ(m.argmax_flat(), 1);  // tie with cell 3 keeps the lower index
  const BBox b = m.box_at(5, 10.0, 8.0);
  EXPECT_DOUBLE_EQ(b.cx(), 4.0 + 32.0);
  EXPECT_DOUBLE_EQ(b.cy(), 6.0 + 16.0);
  EXPECT_DOUBLE_EQ(b.w, 10.0);
}

TEST(ExtractCandidates, TopKOrderAndTies) {
  ResponseMap m;
  m.height = 1;
  m.width = 5;
  m.scores = {0.5, 0.9, 0.5, 1.0, 0.9};
  const std::vector<Candidate> c = extract_candidates(m, {0, 0, 4, 4}, 4);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0].cell, 3);
  EXPECT_EQ(c[1].cell, 1);  // 0.9 tie: lower index first
  EXPECT_EQ(c[2].cell, 4);
  EXPECT_EQ(c[3].cell, 0);  // 0.5 tie: lower index first
  EXPECT_DOUBLE_EQ(c[0].score, 1.0);
}

TEST(ExtractCandidates, ClampsKAndRejectsZero) {
  ResponseMap m;
  m.height = 1;
  m.width = 3;
  m.scores = {0.1, 0.2, 0.3};
  EXPECT_EQ(extract_candidates(m, {0, 0, 1, 1}, 10).size(), 3u);
  EXPECT_THROW(extract_candidates(m, {0, 0, 1, 1}, 0), std::invalid_argument);
}

TEST(ScoreCandidates, AttachesIouAndBrightness) {
  ResponseMap m;
  m.height = 1;
  m.width = 2;
  m.stride = 16;
  m.origin_x = 8.0;
  m.origin_y = 8.0;
  m.scores = {0.8, 0.4};
  GrayImage mask(32, 32, 0.0);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) mask.at(r, c) = 255.0;  // top-left quadrant lit
  const BBox prev{0, 0, 16, 16};
  std::vector<Candidate> cands = extract_candidates(m, prev, 2);
  const BBox b_kf = BBox::from_center(8.0, 8.0, 16.0, 16.0);
  cands = score_candidates(std::move(cands), b_kf, mask);
  for (const Candidate& c : cands) {
    const BBox box = m.box_at(c.cell, prev.w, prev.h);
    EXPECT_DOUBLE_EQ(c.iou_score, iou(b_kf, box) * c.score);
    EXPECT_DOUBLE_EQ(c.brightness, mean_in_box(mask, box));
  }
  // cell 0 sits on the lit quadrant (brightness 1); cell 1 lies beyond it
  EXPECT_DOUBLE_EQ(cands[0].brightness, 1.0);
  EXPECT_DOUBLE_EQ(cands[1].brightness, 0.0);
}

TEST(Correct, GateSuppressesOverlappingCandidate) {
  // candidate heavily overlaps the max-response box -> pick b_mr
  Candidate c;
  c.box = {0, 0, 10, 10};
  c.score = 1.0;
  c.iou_score = 0.5;
  c.brightness = 1.0;
  c.cell = 0;
  const BBox b_mr{1, 0, 10, 10};  // IoB = 0.9 > 0.6
  const BBox out = correct({c}, b_mr);
  EXPECT_TRUE(same_box(out, b_mr));
  // far-away b_mr: keep the candidate
  const BBox far_mr{100, 100, 10, 10};
  EXPECT_TRUE(same_box(correct({c}, far_mr), c.box));
}

TEST(Correct, GateBoundaryIsStrict) {
  Candidate c;
  c.box = {0, 0, 10, 10};
  c.iou_score = 1.0;
  c.brightness = 1.0;
  c.cell = 0;
  const BBox b_mr{4, 0, 10, 10};  // IoB exactly 0.6
  EXPECT_TRUE(same_box(correct({c}, b_mr), c.box));  // 0.6 > 0.6 is false
  const BBox b_mr2{3, 0, 10, 10};  // IoB 0.7
  EXPECT_TRUE(same_box(correct({c}, b_mr2), b_mr2));
}

TEST(Correct, AllZeroCombinedFallsBackToMaxResponse) {
  Candidate c;
  c.box = {0, 0, 10, 10};
  c.iou_score = 0.0;  // no Kalman overlap
  c.brightness = 1.0;
  c.cell = 0;
  const BBox b_mr{50, 50, 10, 10};
  EXPECT_TRUE(same_box(correct({c}, b_mr), b_mr));
  EXPECT_THROW(correct({}, b_mr), std::domain_error);
}

TEST(Correct, ReturnsAMemberBoxProperty) {
  Rng rng(70);
  for (int trial = 0; trial < 300; ++trial) {
    const ResponseMap m = random_map(rng, 4, 4);
    const BBox prev{20, 20, 24, 24};
    const GrayImage mask = random_mask(rng, 64, 64);
    const BBox b_kf = BBox::from_center(rng.uniform(0, 64), rng.uniform(0, 64),
                                        24.0, 24.0);
    std::vector<Candidate> cands =
        score_candidates(extract_candidates(m, prev, kDefaultTopK), b_kf, mask);
    const BBox b_mr = m.box_at(m.argmax_flat(), prev.w, prev.h);
    const BBox out = correct(cands, b_mr);
    bool member = same_box(out, b_mr);
    for (const Candidate& c : cands) member = member || same_box(out, c.box);
    EXPECT_TRUE(member);
  }
}

TEST(Correct, MatchesBruteForceReferenceAcrossSeeds) {
  for (uint64_t seed = 1; seed <= 1000; ++seed) {
    Rng rng(seed);
    const int h = 2 + int(rng.next_u64() % 4);
    const int w = 2 + int(rng.next_u64() % 4);
    const ResponseMap m = random_map(rng, h, w);
    const BBox prev{16, 16, 20, 28};
    const GrayImage mask = random_mask(rng, 96, 96);
    const BBox b_kf = BBox::from_center(rng.uniform(0, 96), rng.uniform(0, 96),
                                        rng.uniform(8, 40), rng.uniform(8, 40));
    std::vector<Candidate> cands =
        score_candidates(extract_candidates(m, prev, kDefaultTopK), b_kf, mask);
    const BBox b_mr = m.box_at(m.argmax_flat(), prev.w, prev.h);
    const BBox got = correct(cands, b_mr);
    const BBox want = correct_reference(m, prev, b_kf, mask, kDefaultTopK, kIobGate);
    EXPECT_TRUE(same_box(got, want)) << "seed " << seed;
  }
}

TEST(Correct, SelectionInvariantToUniformScoreScaling) {
  // scaling every raw score by c > 0 scales all combined scores equally,
  // so the selected box must not change
  Rng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const ResponseMap m = random_map(rng, 3, 3);
    const BBox prev{10, 10, 30, 30};
    const GrayImage mask = random_mask(rng, 80, 80);
    const BBox b_kf = BBox::from_center(rng.uniform(10, 70), rng.uniform(10, 70),
                                        30.0, 30.0);
    BBox base;
    bool first = true;
    for (double scale : {0.1, 1.0, 10.0}) {
      ResponseMap ms = m;
      for (double& s : ms.scores) s *= scale;
      std::vector<Candidate> cands =
          score_candidates(extract_candidates(ms, prev, kDefaultTopK), b_kf, mask);
      const BBox b_mr = ms.box_at(ms.argmax_flat(), prev.w, prev.h);
      const BBox out = correct(cands, b_mr);
      if (first) {
        base = out;
        first = false;
      } else {
        EXPECT_TRUE(same_box(out, base));
      }
    }
  }
}
