#pragma once

#include <span>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"

namespace slapseg::img {

/// Read-only channel-major (C, H, W) view over a real-valued feature grid.
/// Cell (y, x) has its center at (x + 0.5, y + 0.5) in feature coordinates.
struct FeatureView {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::span<const double> data;

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct RoiAlignParams {
  int out_size = 7;
  int samples_per_bin = 2;
};

/// Pools `roi` (feature coordinates) into out_size x out_size bins per
/// channel. Each bin averages samples_per_bin^2 bilinear samples taken at
/// regularly spaced interior points; positions are never rounded. Sample
/// positions beyond the grid are clamped to the border cells.
/// Output layout is (C, out_size, out_size).
/// Throws DegenerateRoiError when `roi` does not overlap the grid.
std::vector<double> roi_align(const FeatureView& features, const Box& roi, const RoiAlignParams& params);

/// Accumulates d(loss)/d(features) into `grad_features` (same layout as the
/// forward input) given d(loss)/d(output).
void roi_align_backward(int channels, int height, int width, const Box& roi, const RoiAlignParams& params,
                        std::span<const double> grad_output, std::span<double> grad_features);

}  // namespace slapseg::img
