#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"

namespace slapseg::eval {

enum class Side { kLeft, kTop, kRight, kBottom };
inline constexpr std::array<Side, 4> kSides{Side::kLeft, Side::kTop, Side::kRight, Side::kBottom};
std::string_view to_string(Side s);

/// Signed per-side error in pixels. Positive means the detected side reaches
/// further out than the truth (captures more), negative that it falls short.
struct SideError {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double operator[](Side s) const;
  friend bool operator==(const SideError&, const SideError&) = default;
};

SideError side_errors(const img::Box& detected, const img::Box& truth);

struct SideStats {
  double mean = 0.0;  // mean |error|
  double std = 0.0;   // population std of |error|
};

struct MaeReport {
  std::array<SideStats, 4> sides{};
  std::size_t count = 0;

  const SideStats& operator[](Side s) const { return sides[static_cast<int>(s)]; }
};

/// Per side: mean of |error| over all fingerprints and the standard
/// deviation of |error|. Throws ValidationError on an empty list.
MaeReport mae(std::span<const SideError> errors);

inline constexpr double kSideTolerance = 32.0;
inline constexpr double kVerticalTolerance = 64.0;

/// Under-segmentation strictly beyond the tolerance: error < -32 on left and
/// right, error < -64 on top and bottom.
struct ToleranceFlags {
  bool left = false;
  bool top = false;
  bool right = false;
  bool bottom = false;

  bool operator[](Side s) const;
  bool any() const { return left || top || right || bottom; }
  friend bool operator==(const ToleranceFlags&, const ToleranceFlags&) = default;
};

ToleranceFlags tolerance_flags(const SideError& e);

/// Counts of flagged fingerprints per side, plus fingerprints with any flag.
struct ToleranceSummary {
  std::array<std::size_t, 4> flagged{};
  std::size_t any = 0;
  std::size_t count = 0;
};

ToleranceSummary summarize_tolerance(std::span<const SideError> errors);

/// Bin k covers [origin + k * bin_width, origin + (k + 1) * bin_width).
/// The origin is a multiple of the bin width.
struct Histogram {
  Side side = Side::kBottom;
  double bin_width = 1.0;
  double origin = 0.0;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Throws ValidationError unless bin_width > 0. Empty input gives no bins.
Histogram error_histogram(std::span<const SideError> errors, Side side, double bin_width);

/// Fraction of errors on `side` strictly below `limit`.
double tail_fraction_below(std::span<const SideError> errors, Side side, double limit);
/// Fraction of errors on `side` strictly above `limit`.
double tail_fraction_above(std::span<const SideError> errors, Side side, double limit);

/// bin_start,bin_end,count
std::string histogram_csv(const Histogram& h);
/// side,mean_abs,std_abs,count
std::string mae_csv(const MaeReport& r);

}  // namespace slapseg::eval
