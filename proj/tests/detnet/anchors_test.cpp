#include <gtest/gtest.h>

#include <cmath>

#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"
#include "slapseg/detnet/anchors.hpp"

namespace slapseg::det {
namespace {

TEST(Anchors, SixtyFourSquareGivesTwoHundredForty) {
  const auto a = generate_anchors(64, 64, {});
  ASSERT_EQ(a.size(), 4u * 4u * 15u);
  // First position, first scale, ratios 0.5 / 1 / 2.
  const double s = 24;
  EXPECT_NEAR(a[1].width(), s, 1e-12);
  EXPECT_NEAR(a[1].height(), s, 1e-12);
  EXPECT_NEAR(a[0].width() / a[0].height(), 0.5, 1e-12);
  EXPECT_NEAR(a[2].width() / a[2].height(), 2.0, 1e-12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int pos = static_cast<int>(i / 15);
    EXPECT_NEAR(a[i].center().x, (pos % 4 + 0.5) * 16, 1e-9);
    EXPECT_NEAR(a[i].center().y, (pos / 4 + 0.5) * 16, 1e-9);
    EXPECT_NEAR(a[i].width() * a[i].height(), std::pow(AnchorConfig{}.scales[(i % 15) / 3], 2), 1e-6);
  }
}

TEST(Anchors, ConfigValidation) {
  AnchorConfig c;
  c.scales[0] = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(AnchorConfig{}.validate());
  EXPECT_THROW(generate_anchors(8, 8, {}), ValidationError);
}

TEST(LabelAnchors, ThresholdsAndForcedPositive) {
  const img::Box gt{0, 0, 10, 10};
  const std::vector<img::Box> anchors{
      {0, 0, 10, 8},      // IoU 0.8
      {0, 0, 10, 5},      // IoU 0.5
      {0, 0, 10, 2},      // IoU 0.2
      {50, 50, 60, 60},   // IoU 0
  };
  const auto m = label_anchors(anchors, std::vector<img::Box>{gt});
  EXPECT_EQ(m.labels[0], AnchorLabel::kPositive);
  EXPECT_EQ(m.labels[1], AnchorLabel::kNeutral);
  EXPECT_EQ(m.labels[2], AnchorLabel::kNegative);
  EXPECT_EQ(m.labels[3], AnchorLabel::kNegative);
  EXPECT_EQ(m.matched[0], 0);
  EXPECT_NEAR(m.max_iou[0], 0.8, 1e-12);

  // Nothing clears 0.7, so the best anchor is promoted.
  const std::vector<img::Box> weak{{0, 0, 10, 5}, {0, 0, 10, 2}};
  const auto w = label_anchors(weak, std::vector<img::Box>{gt});
  EXPECT_EQ(w.labels[0], AnchorLabel::kPositive);
  EXPECT_EQ(w.matched[0], 0);
  EXPECT_EQ(w.labels[1], AnchorLabel::kNegative);
}

TEST(LabelAnchors, SharedBestAnchorKeepsBothBoxesCovered) {
  // Anchor 0 is the best for both boxes; the second box falls back to its
  // best unclaimed anchor.
  const std::vector<img::Box> gt{{0, 0, 10, 10}, {0, 0, 10, 9}};
  const std::vector<img::Box> anchors{{0, 0, 10, 9.5}, {0, 0, 10, 4}, {40, 40, 50, 50}};
  const auto m = label_anchors(anchors, gt);
  EXPECT_EQ(m.labels[0], AnchorLabel::kPositive);
  EXPECT_EQ(m.matched[0], 0);
  EXPECT_EQ(m.labels[1], AnchorLabel::kPositive);
  EXPECT_EQ(m.matched[1], 1);
  EXPECT_EQ(m.labels[2], AnchorLabel::kNegative);
}

TEST(LabelAnchors, EmptyTruthThrows) {
  const std::vector<img::Box> anchors{{0, 0, 4, 4}};
  EXPECT_THROW(label_anchors(anchors, {}), ValidationError);
}

TEST(Deltas, WorkedExample) {
  // Box twice the anchor's size, center shifted by half an anchor.
  const img::Box anchor{0, 0, 10, 10};
  const img::Box box{-5, -5, 15, 15};
  const Deltas zero = encode_deltas(box, anchor);
  EXPECT_NEAR(zero[0], 0.0, 1e-15);
  EXPECT_NEAR(zero[2], std::log(2.0), 1e-15);
  const Deltas t = encode_deltas({0, 0, 20, 20}, anchor);
  EXPECT_NEAR(t[0], 0.5, 1e-15);
  EXPECT_NEAR(t[1], 0.5, 1e-15);
  EXPECT_NEAR(t[2], std::log(2.0), 1e-15);
  EXPECT_NEAR(t[3], std::log(2.0), 1e-15);
}

TEST(Deltas, DecodeInvertsEncode) {
  Rng rng(41);
  for (int i = 0; i < 10000; ++i) {
    const double aw = rng.uniform(8, 200);
    const double ah = rng.uniform(8, 200);
    const double ax = rng.uniform(0, 400);
    const double ay = rng.uniform(0, 400);
    const img::Box anchor{ax, ay, ax + aw, ay + ah};
    const double bw = aw * rng.uniform(0.2, 5);
    const double bh = ah * rng.uniform(0.2, 5);
    const double bx = ax + rng.uniform(-100, 100);
    const double by = ay + rng.uniform(-100, 100);
    const img::Box box{bx, by, bx + bw, by + bh};
    const img::Box back = decode_deltas(encode_deltas(box, anchor), anchor);
    const double tol = 1e-9 * std::max(1.0, std::max(bw, bh));
    ASSERT_NEAR(back.left, box.left, tol);
    ASSERT_NEAR(back.top, box.top, tol);
    ASSERT_NEAR(back.right, box.right, tol);
    ASSERT_NEAR(back.bottom, box.bottom, tol);
  }
}

TEST(Deltas, NormalizationRoundTrips) {
  const Deltas t{0.3, -0.2, 0.7, -1.1};
  const Deltas n = normalize_deltas(t);
  EXPECT_NEAR(n[0], 3.0, 1e-12);
  EXPECT_NEAR(n[3], -5.5, 1e-12);
  const Deltas back = denormalize_deltas(n);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(back[k], t[k], 1e-15);
}

TEST(Deltas, CheckedRejectsDegenerate) {
  EXPECT_THROW(encode_deltas_checked({0, 0, 0, 5}, {0, 0, 4, 4}), ValidationError);
  EXPECT_THROW(encode_deltas_checked({0, 0, 5, 5}, {0, 0, 4, 0}), ValidationError);
}

}  // namespace
}  // namespace slapseg::det
