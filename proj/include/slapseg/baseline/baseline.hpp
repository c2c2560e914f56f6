#pragma once

#include <cstdint>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"

namespace slapseg::base {

/// Foreground raster: 1 where the pixel is at or below the Otsu threshold.
struct Binary {
  int width = 0;
  int height = 0;
  /// Largest gray level counted as foreground; -1 when nothing is.
  int threshold = -1;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

/// Otsu's threshold over the 256-bin histogram. Among equally good
/// thresholds the lowest wins. A single-intensity image has no foreground.
int otsu_threshold(const img::GrayImage& image);
Binary binarize(const img::GrayImage& image);

struct RotationEstimate {
  /// Rotation the slap carries, degrees in [-45, 45]; rotating the image by
  /// -angle makes it upright.
  double angle = 0.0;
  /// Foreground second moments are isotropic, so no axis is defined.
  bool degenerate = false;
};

/// Coarse angle from the sharpest column projection over [-45, 45], refined
/// by the principal axes (central second moments) of the individual finger
/// bands. Throws ValidationError when the foreground is empty.
RotationEstimate estimate_rotation(const img::GrayImage& image);
RotationEstimate estimate_rotation(const Binary& fg);

struct BaselineParams {
  /// Column bands end where the smoothed column profile drops below this
  /// fraction of its peak.
  double valley_fraction = 0.2;
  int column_smoothing = 9;
  /// Rows belong to a finger while the smoothed row profile of its band
  /// stays above this fraction of the band's peak row.
  double row_fraction = 0.1;
  int row_smoothing = 5;
  /// Row runs closer than this are merged into one finger extent.
  int row_bridge = 24;
  /// Bands lighter than this fraction of the heaviest are noise.
  double min_band_fraction = 0.1;
  int max_fingers = 4;
};

struct BaselineResult {
  double angle = 0.0;
  bool degenerate_angle = false;
  /// Boxes in the upright frame, left to right.
  std::vector<img::Box> boxes;
  /// Band mass relative to the heaviest band, per box.
  std::vector<double> confidence;
  /// Image -> upright frame (same canvas size as the input).
  img::RigidTransform image_to_upright;
  int upright_width = 0;
  int upright_height = 0;
};

/// Classical segmenter: Otsu foreground, moment-based rotation, column
/// projection bands split at valleys, then a row projection per band for
/// the vertical extent. Fewer than two bands gives one low-confidence box.
BaselineResult baseline_segment(const img::GrayImage& image, const BaselineParams& params = {});

inline constexpr double kSingleBandConfidence = 0.1;

}  // namespace slapseg::base
