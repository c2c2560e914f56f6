#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"

namespace slapseg::det {

struct AnchorConfig {
  /// Square-equivalent side lengths (sqrt of anchor area), px.
  std::array<double, 5> scales{24, 40, 64, 100, 160};
  /// Width / height.
  std::array<double, 3> ratios{0.5, 1.0, 2.0};
  int stride = 16;

  static constexpr int kPerPosition = 15;
  void validate() const;
  friend bool operator==(const AnchorConfig&, const AnchorConfig&) = default;
};

/// Anchors ordered by grid row, grid column, scale, ratio, matching the RPN
/// output layout (channel = scale * 3 + ratio). Centers sit at
/// (j + 0.5) * stride, (i + 0.5) * stride.
std::vector<img::Box> generate_anchors(int image_width, int image_height, const AnchorConfig& cfg);

enum class AnchorLabel : std::int8_t { kNegative = 0, kPositive = 1, kNeutral = -1 };

struct AnchorMatch {
  std::vector<AnchorLabel> labels;
  /// Ground-truth index for positives, -1 otherwise.
  std::vector<int> matched;
  /// Highest IoU with any ground truth, per anchor.
  std::vector<double> max_iou;
};

struct AnchorThresholds {
  double positive = 0.7;
  double negative = 0.3;
};

/// IoU > positive -> positive; IoU < negative against every box -> negative;
/// anything else neutral. Each ground-truth box, in order, claims its best
/// anchor not claimed by an earlier box; that anchor is forced positive and
/// matched to it.
AnchorMatch label_anchors(std::span<const img::Box> anchors, std::span<const img::Box> gt,
                          const AnchorThresholds& th = {});

using Deltas = std::array<double, 4>;

/// (dx / w_a, dy / h_a, ln(w / w_a), ln(h / h_a)) with center offsets.
Deltas encode_deltas(const img::Box& box, const img::Box& anchor);
Deltas encode_deltas_checked(const img::Box& box, const img::Box& anchor);
img::Box decode_deltas(const Deltas& t, const img::Box& anchor);

/// Regression targets are divided by these before entering the loss, so the
/// four coordinates have comparable spread.
inline constexpr Deltas kDeltaStd{0.1, 0.1, 0.2, 0.2};
Deltas normalize_deltas(const Deltas& t);
Deltas denormalize_deltas(const Deltas& t);

}  // namespace slapseg::det
