#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"

namespace slapseg::synth {

enum class FingerLabel { kIndex, kMiddle, kRing, kLittle, kThumb };
enum class Cohort { kAdult, kJuvenile };
enum class Hand { kLeft, kRight, kThumbs };

std::string_view to_string(FingerLabel v);
std::string_view to_string(Cohort v);
std::string_view to_string(Hand v);
FingerLabel parse_finger_label(std::string_view s);
Cohort parse_cohort(std::string_view s);
Hand parse_hand(std::string_view s);

/// Geometry and identity of one rendered finger. `center` is the center of
/// the fingertip envelope in canvas pixels; `width` x `height` its extent.
struct FingerSpec {
  img::Point center;
  double width = 0.0;
  double height = 0.0;
  double ridge_period = 9.0;
  std::uint64_t orientation_seed = 0;
  FingerLabel label = FingerLabel::kIndex;
  /// Render the medial phalanx below the distal crease. The blob carries
  /// ink but is not part of the fingertip mask.
  bool joint_blob = false;

  /// Throws ValidationError on ridge_period < 4 or non-positive extents.
  void validate() const;
  /// Full inked extent (fingertip plus joint blob when enabled).
  img::Box footprint() const;
  img::Box envelope_box() const;
};

/// Binary raster placed at (x0, y0) in canvas pixels.
struct BinaryMask {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t area() const;
  /// Tight hull of set pixels in continuous coordinates (pixel cells).
  img::Box hull() const;
  /// Shrinks the raster to the hull of its set pixels.
  BinaryMask cropped() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct FingerPatch {
  /// Patch pixels; (origin_x, origin_y) is the canvas position of pixel (0, 0).
  img::GrayImage image;
  int origin_x = 0;
  int origin_y = 0;
  /// Fingertip envelope support, same placement as `image`.
  BinaryMask mask;
};

/// Thresholded cosine of a smoothly warped radial phase field with local
/// period `ridge_period`, confined to an elliptical envelope whose contrast
/// fades toward the rim. `orientation_seed` fixes the ridge pattern (the
/// finger's identity); `rng_seed` only varies capture conditions.
FingerPatch synth_fingerprint(const FingerSpec& spec, std::uint64_t rng_seed);

}  // namespace slapseg::synth
