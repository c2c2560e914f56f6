#pragma once

#include <cstdint>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"
#include "slapseg/synthgen/finger.hpp"

namespace slapseg::synth {

struct SlapSpec {
  Cohort cohort = Cohort::kAdult;
  Hand hand = Hand::kRight;
  double rotation = 0.0;
  std::vector<FingerSpec> fingers;
  double noise_sigma = 0.0;
  int canvas_width = 0;
  int canvas_height = 0;

  /// 4 fingers for a hand, 2 for thumbs; footprints inside the canvas and
  /// separated by at least one pixel. Throws ValidationError.
  void validate() const;
};

/// Fingertip annotations in the upright (pre-rotation) frame.
struct GroundTruth {
  std::vector<img::Box> boxes;
  /// Either empty (box-only annotations) or one mask per box.
  std::vector<BinaryMask> masks;
  std::vector<FingerLabel> labels;
  std::vector<bool> joint_blobs;
  double rotation = 0.0;
  int upright_width = 0;
  int upright_height = 0;

  std::size_t size() const { return boxes.size(); }
  /// Maps upright coordinates into a stored image of the given size: the
  /// upright canvas is rotated about its center onto the image center.
  img::RigidTransform upright_to_image(int image_width, int image_height) const;
  /// Expanded frame a generated slap is stored in.
  img::RotationFrame image_frame() const;
  void validate() const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Slap {
  img::GrayImage image;
  GroundTruth truth;
};

/// Composites the fingers by darkest-ink-wins on a white canvas, adds
/// Gaussian noise, then rotates the canvas (expanding it).
Slap synth_slap(const SlapSpec& spec, std::uint64_t rng_seed);

/// Upright composite before noise and rotation.
img::GrayImage composite_fingers(const SlapSpec& spec, std::uint64_t rng_seed);

/// Finger order from left to right on the platen.
std::vector<FingerLabel> layout_labels(Hand hand);

/// Cohort default finger size and ridge period for a label.
struct FingerDefaults {
  double width;
  double height;
  double ridge_period;
};
FingerDefaults finger_defaults(Cohort cohort, FingerLabel label);
/// Default upright canvas size for a cohort.
std::pair<int, int> default_canvas(Cohort cohort);

}  // namespace slapseg::synth
