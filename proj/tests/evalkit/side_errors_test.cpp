#include <gtest/gtest.h>

#include <random>

#include "slapseg/common/error.hpp"
#include "slapseg/evalkit/side_errors.hpp"

namespace slapseg::eval {
namespace {

const img::Box kTruth{100, 200, 180, 330};

TEST(SideErrors, IdenticalBoxesGiveZero) { EXPECT_EQ(side_errors(kTruth, kTruth), SideError{}); }

TEST(SideErrors, InflationIsPositiveOnEverySide) {
  const img::Box grown{95, 195, 185, 335};
  EXPECT_EQ(side_errors(grown, kTruth), (SideError{5, 5, 5, 5}));
}

TEST(SideErrors, ShortBottomIsNegative) {
  const img::Box cut{100, 200, 180, 266};
  EXPECT_EQ(side_errors(cut, kTruth), (SideError{0, 0, 0, -64}));
}

TEST(SideErrors, TranslationInvariant) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-500, 500);
  for (int i = 0; i < 200; ++i) {
    const img::Box t{u(gen), u(gen), 0, 0};
    const img::Box truth{t.left, t.top, t.left + 50 + std::abs(u(gen)), t.top + 60 + std::abs(u(gen))};
    const img::Box det{truth.left + u(gen) / 20, truth.top + u(gen) / 20, truth.right + u(gen) / 20,
                       truth.bottom + u(gen) / 20};
    const SideError a = side_errors(det, truth);
    const SideError b = side_errors(det.translated(256, -1024), truth.translated(256, -1024));
    for (Side s : kSides) EXPECT_NEAR(a[s], b[s], 1e-9);
  }
}

TEST(Mae, SymmetricErrorsHaveZeroSpread) {
  const std::vector<SideError> e{{3, 3, 3, 3}, {-3, -3, -3, -3}};
  const MaeReport r = mae(e);
  EXPECT_EQ(r.count, 2u);
  for (Side s : kSides) {
    EXPECT_DOUBLE_EQ(r[s].mean, 3.0);
    EXPECT_DOUBLE_EQ(r[s].std, 0.0);
  }
}

TEST(Mae, HandComputedMeanAndSpread) {
  // |left| = {1, 3}: mean 2, population std 1.
  const std::vector<SideError> e{{1, 0, 0, -10}, {-3, 0, 0, 2}};
  const MaeReport r = mae(e);
  EXPECT_DOUBLE_EQ(r[Side::kLeft].mean, 2.0);
  EXPECT_DOUBLE_EQ(r[Side::kLeft].std, 1.0);
  EXPECT_DOUBLE_EQ(r[Side::kTop].mean, 0.0);
  EXPECT_DOUBLE_EQ(r[Side::kBottom].mean, 6.0);
  EXPECT_DOUBLE_EQ(r[Side::kBottom].std, 4.0);
}

TEST(Mae, ZeroOnlyWhenAllErrorsAreZero) {
  std::vector<SideError> e(10);
  EXPECT_EQ(mae(e)[Side::kRight].mean, 0.0);
  e[7].right = 1e-9;
  EXPECT_GT(mae(e)[Side::kRight].mean, 0.0);
  EXPECT_EQ(mae(e)[Side::kLeft].mean, 0.0);
}

TEST(Mae, KnownPerturbationGivesExactlyK) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> pos(0, 1000);
  std::bernoulli_distribution sign(0.5);
  for (int k : {1, 4, 17, 64}) {
    std::vector<SideError> errs;
    for (int i = 0; i < 300; ++i) {
      const double x = std::floor(pos(gen)), y = std::floor(pos(gen));
      const img::Box truth{x, y, x + 60, y + 90};
      auto d = [&] { return sign(gen) ? double(k) : -double(k); };
      const img::Box det{truth.left - d(), truth.top - d(), truth.right + d(), truth.bottom + d()};
      errs.push_back(side_errors(det, truth));
    }
    const MaeReport r = mae(errs);
    for (Side s : kSides) {
      EXPECT_EQ(r[s].mean, k) << to_string(s);
      EXPECT_EQ(r[s].std, 0.0);
    }
  }
}

TEST(Mae, EmptyListThrows) { EXPECT_THROW(mae({}), ValidationError); }

TEST(Tolerance, FlagsFireStrictlyBeyondTheLimits) {
  EXPECT_EQ(tolerance_flags({-32, -64, -32, -64}), ToleranceFlags{});
  EXPECT_EQ(tolerance_flags({-33, -65, -32.5, -64.5}), (ToleranceFlags{true, true, true, true}));
  EXPECT_EQ(tolerance_flags({0, 0, 0, -65}), (ToleranceFlags{false, false, false, true}));
  EXPECT_EQ(tolerance_flags({100, 100, 100, 100}), ToleranceFlags{});
  EXPECT_EQ(tolerance_flags({-33, -40, 0, 0}), (ToleranceFlags{true, false, false, false}));
}

TEST(Tolerance, FlagsAreMonotoneInTheError) {
  for (Side s : kSides) {
    const double limit = (s == Side::kTop || s == Side::kBottom) ? kVerticalTolerance : kSideTolerance;
    bool seen_clear = false;
    for (double v = -200; v <= 200; v += 0.25) {
      SideError e;
      (s == Side::kLeft ? e.left : s == Side::kTop ? e.top : s == Side::kRight ? e.right : e.bottom) = v;
      const bool f = tolerance_flags(e)[s];
      EXPECT_EQ(f, v < -limit);
      if (!f) seen_clear = true;
      EXPECT_FALSE(f && seen_clear);
    }
  }
}

TEST(Tolerance, SummaryCountsFlaggedPrints) {
  const std::vector<SideError> e{{-40, 0, 0, 0}, {-40, -70, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, -65}};
  const ToleranceSummary t = summarize_tolerance(e);
  EXPECT_EQ(t.count, 4u);
  EXPECT_EQ(t.any, 3u);
  EXPECT_EQ(t.flagged[0], 2u);
  EXPECT_EQ(t.flagged[1], 1u);
  EXPECT_EQ(t.flagged[2], 0u);
  EXPECT_EQ(t.flagged[3], 1u);
}

TEST(Histogram, BinsCoverEveryError) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0, 40);
  std::vector<SideError> e(1000);
  for (auto& x : e) x.bottom = n(gen);
  const Histogram h = error_histogram(e, Side::kBottom, 8.0);
  EXPECT_EQ(h.total(), e.size());
  EXPECT_EQ(std::fmod(h.origin, 8.0), 0.0);
  for (const auto& x : e) {
    const auto k = static_cast<std::size_t>(std::floor((x.bottom - h.origin) / 8.0));
    ASSERT_LT(k, h.counts.size());
  }
}

TEST(Histogram, HandExample) {
  const std::vector<SideError> e{{0, 0, 0, -8}, {0, 0, 0, -0.5}, {0, 0, 0, 0}, {0, 0, 0, 7.9}, {0, 0, 0, 8}};
  const Histogram h = error_histogram(e, Side::kBottom, 8.0);
  EXPECT_EQ(h.origin, -8.0);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 2, 1}));
  EXPECT_EQ(histogram_csv(h), "bin_start,bin_end,count\n-8.000,0.000,2\n0.000,8.000,2\n8.000,16.000,1\n");
  EXPECT_THROW(error_histogram(e, Side::kBottom, 0.0), ValidationError);
  EXPECT_TRUE(error_histogram({}, Side::kBottom, 8.0).counts.empty());
}

TEST(Histogram, TailFractions) {
  const std::vector<SideError> e{{0, 0, 0, -100}, {0, 0, 0, -64}, {0, 0, 0, 70}, {0, 0, 0, 0}};
  EXPECT_DOUBLE_EQ(tail_fraction_below(e, Side::kBottom, -64), 0.25);
  EXPECT_DOUBLE_EQ(tail_fraction_above(e, Side::kBottom, 64), 0.25);
  EXPECT_DOUBLE_EQ(tail_fraction_above(e, Side::kLeft, 64), 0.0);
}

}  // namespace
}  // namespace slapseg::eval
