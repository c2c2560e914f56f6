#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"
#include "slapseg/imgcore/roi_align.hpp"

namespace slapseg::img {
namespace {

TEST(RoiAlign, ConstantMapStaysConstant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 3 + static_cast<int>(rng.below(8));
    const int w = 3 + static_cast<int>(rng.below(8));
    const int c = 1 + static_cast<int>(rng.below(3));
    std::vector<double> data(static_cast<std::size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < h * w; ++i) data[ch * h * w + i] = 1.5 + ch;
    }
    const double l = rng.uniform(-2, w - 1.0);
    const double t = rng.uniform(-2, h - 1.0);
    const Box roi{l, t, l + rng.uniform(2.5, 6), t + rng.uniform(2.5, 6)};
    const RoiAlignParams p{1 + static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(3))};
    const auto out = roi_align({c, h, w, data}, roi, p);
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < p.out_size * p.out_size; ++i) {
        EXPECT_NEAR(out[ch * p.out_size * p.out_size + i], 1.5 + ch, 1e-12);
      }
    }
  }
}

TEST(RoiAlign, LinearRampGivesMeanSampleX) {
  const int h = 6;
  const int w = 10;
  std::vector<double> ramp(h * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) ramp[y * w + x] = x + 0.5;  // f(x, y) = x at cell centers
  }
  const Box roi{1.3, 0.9, 7.7, 4.6};
  const RoiAlignParams p{4, 3};
  const auto out = roi_align({1, h, w, ramp}, roi, p);
  const double bw = roi.width() / p.out_size;
  for (int by = 0; by < p.out_size; ++by) {
    for (int bx = 0; bx < p.out_size; ++bx) {
      double mean_x = 0.0;
      for (int s = 0; s < p.samples_per_bin; ++s) mean_x += roi.left + bw * (bx + (s + 0.5) / p.samples_per_bin);
      mean_x /= p.samples_per_bin;
      EXPECT_NEAR(out[by * p.out_size + bx], mean_x, 1e-12);
    }
  }
}

TEST(RoiAlign, AlignedTwoByTwoMatchesDirectBilinear) {
  const int h = 4;
  const int w = 5;
  Rng rng(9);
  std::vector<double> grid(h * w);
  for (double& v : grid) v = rng.uniform(-1, 1);
  const Box roi{1, 1, 3, 3};
  const auto out = roi_align({1, h, w, grid}, roi, {2, 1});
  const double xs[2] = {1.5, 2.5};
  for (int by = 0; by < 2; ++by) {
    for (int bx = 0; bx < 2; ++bx) {
      EXPECT_NEAR(out[by * 2 + bx], testing::direct_bilinear(grid, h, w, xs[bx], xs[by]), 1e-15);
    }
  }
  // Sample points sit on cell centers here, so values are the cells themselves.
  EXPECT_DOUBLE_EQ(out[0], grid[1 * w + 1]);
  EXPECT_DOUBLE_EQ(out[3], grid[2 * w + 2]);
}

TEST(RoiAlign, RandomRoisMatchDirectBilinearOracle) {
  Rng rng(17);
  const int h = 7;
  const int w = 9;
  std::vector<double> grid(h * w);
  for (double& v : grid) v = rng.uniform(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const double l = rng.uniform(-1, 6);
    const double t = rng.uniform(-1, 4);
    const Box roi{l, t, l + rng.uniform(1.5, 5), t + rng.uniform(1.5, 5)};
    const RoiAlignParams p{3, 2};
    const auto out = roi_align({1, h, w, grid}, roi, p);
    const double bw = roi.width() / 3;
    const double bh = roi.height() / 3;
    for (int by = 0; by < 3; ++by) {
      for (int bx = 0; bx < 3; ++bx) {
        double acc = 0;
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            acc += testing::direct_bilinear(grid, h, w, roi.left + bw * (bx + (sx + 0.5) / 2),
                                            roi.top + bh * (by + (sy + 0.5) / 2));
          }
        }
        EXPECT_NEAR(out[by * 3 + bx], acc / 4, 1e-12);
      }
    }
  }
}

TEST(RoiAlign, OutsideGridIsDegenerate) {
  std::vector<double> grid(16, 1.0);
  EXPECT_THROW(roi_align({1, 4, 4, grid}, {5, 5, 8, 8}, {2, 2}), DegenerateRoiError);
  EXPECT_THROW(roi_align({1, 4, 4, grid}, {-6, 0, -1, 2}, {2, 2}), DegenerateRoiError);
}

TEST(RoiAlign, BackwardIsAdjointOfForward) {
  // <roi_align(f), g> == <f, roi_align_backward(g)> for a linear operator.
  Rng rng(23);
  const int c = 2;
  const int h = 6;
  const int w = 7;
  std::vector<double> f(c * h * w);
  for (double& v : f) v = rng.uniform(-1, 1);
  const Box roi{0.7, -0.4, 5.9, 4.3};
  const RoiAlignParams p{3, 2};
  const auto out = roi_align({c, h, w, f}, roi, p);
  std::vector<double> g(out.size());
  for (double& v : g) v = rng.uniform(-1, 1);
  std::vector<double> gf(f.size(), 0.0);
  roi_align_backward(c, h, w, roi, p, g, gf);
  double lhs = 0;
  double rhs = 0;
  for (std::size_t i = 0; i < out.size(); ++i) lhs += out[i] * g[i];
  for (std::size_t i = 0; i < f.size(); ++i) rhs += f[i] * gf[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

}  // namespace
}  // namespace slapseg::img
