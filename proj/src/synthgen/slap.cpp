#include "slapseg/synthgen/slap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"

namespace slapseg::synth {

namespace {

constexpr double kAdultWidth = 52.0;
constexpr double kAdultHeight = 84.0;
constexpr double kAdultRidgePeriod = 9.0;
constexpr double kJuvenileSize = 0.6;
constexpr double kJuvenileRidge = 0.65;
constexpr int kAdultCanvasWidth = 288;
constexpr int kAdultCanvasHeight = 240;

std::uint8_t to_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::vector<FingerLabel> layout_labels(Hand hand) {
  switch (hand) {
    case Hand::kRight:
      return {FingerLabel::kIndex, FingerLabel::kMiddle, FingerLabel::kRing, FingerLabel::kLittle};
    case Hand::kLeft:
      return {FingerLabel::kLittle, FingerLabel::kRing, FingerLabel::kMiddle, FingerLabel::kIndex};
    case Hand::kThumbs:
      return {FingerLabel::kThumb, FingerLabel::kThumb};
  }
  return {};
}

FingerDefaults finger_defaults(Cohort cohort, FingerLabel label) {
  double sw = 1.0;
  double sh = 1.0;
  switch (label) {
    case FingerLabel::kIndex: break;
    case FingerLabel::kMiddle: sh = 1.05; break;
    case FingerLabel::kRing: sw = 0.96; break;
    case FingerLabel::kLittle: sw = 0.85; sh = 0.85; break;
    case FingerLabel::kThumb: sw = 1.15; sh = 1.05; break;
  }
  FingerDefaults d{kAdultWidth * sw, kAdultHeight * sh, kAdultRidgePeriod};
  if (cohort == Cohort::kJuvenile) {
    d.width *= kJuvenileSize;
    d.height *= kJuvenileSize;
    d.ridge_period *= kJuvenileRidge;
  }
  return d;
}

std::pair<int, int> default_canvas(Cohort cohort) {
  if (cohort == Cohort::kAdult) return {kAdultCanvasWidth, kAdultCanvasHeight};
  return {static_cast<int>(std::lround(kAdultCanvasWidth * kJuvenileSize)),
          static_cast<int>(std::lround(kAdultCanvasHeight * kJuvenileSize))};
}

void SlapSpec::validate() const {
  const std::size_t want = hand == Hand::kThumbs ? 2 : 4;
  if (fingers.size() != want) {
    throw ValidationError("slap for hand '" + std::string(to_string(hand)) + "' needs " + std::to_string(want) +
                          " fingers, got " + std::to_string(fingers.size()));
  }
  if (canvas_width <= 0 || canvas_height <= 0) throw ValidationError("canvas must be non-empty");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be non-negative");
  if (!std::isfinite(rotation)) throw ValidationError("rotation must be finite");
  const img::Box canvas{0, 0, static_cast<double>(canvas_width), static_cast<double>(canvas_height)};
  for (std::size_t i = 0; i < fingers.size(); ++i) {
    fingers[i].validate();
    if (!canvas.contains(fingers[i].footprint())) {
      throw ValidationError("finger " + std::to_string(i) + " footprint leaves the canvas");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const img::Box a = fingers[i].footprint();
      const img::Box grown{a.left - 1, a.top - 1, a.right + 1, a.bottom + 1};
      if (iou(grown, fingers[j].footprint()) > 0.0) {
        throw ValidationError("fingers " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
      }
    }
  }
}

img::RotationFrame GroundTruth::image_frame() const {
  return img::rotation_frame(upright_width, upright_height, rotation);
}

img::RigidTransform GroundTruth::upright_to_image(int image_width, int image_height) const {
  return img::centered_rotation(upright_width, upright_height, rotation, image_width, image_height);
}

void GroundTruth::validate() const {
  if (labels.size() != boxes.size() || joint_blobs.size() != boxes.size()) {
    throw ValidationError("ground truth boxes, labels and joint flags differ in length");
  }
  if (!masks.empty() && masks.size() != boxes.size()) throw ValidationError("ground truth masks and boxes differ in length");
  if (upright_width <= 0 || upright_height <= 0) throw ValidationError("upright size must be positive");
  if (!std::isfinite(rotation)) throw ValidationError("rotation must be finite");
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].valid()) throw ValidationError("ground truth box " + std::to_string(i) + " is invalid");
    if (!masks.empty()) {
      const BinaryMask& m = masks[i];
      if (m.width <= 0 || m.height <= 0 || m.bits.size() != static_cast<std::size_t>(m.width) * m.height) {
        throw ValidationError("ground truth mask " + std::to_string(i) + " has inconsistent size");
      }
      if (!(m.hull() == boxes[i])) {
        throw ValidationError("ground truth box " + std::to_string(i) + " is not the hull of its mask");
      }
    }
  }
}

namespace {

img::GrayImage composite(const SlapSpec& spec, const std::vector<FingerPatch>& patches) {
  img::GrayImage canvas(spec.canvas_width, spec.canvas_height, 255);
  for (const FingerPatch& p : patches) {
    for (int y = 0; y < p.image.height(); ++y) {
      const int cy = p.origin_y + y;
      if (cy < 0 || cy >= canvas.height()) continue;
      for (int x = 0; x < p.image.width(); ++x) {
        const int cx = p.origin_x + x;
        if (cx < 0 || cx >= canvas.width()) continue;
        canvas.at(cx, cy) = std::min(canvas.at(cx, cy), p.image.at(x, y));
      }
    }
  }
  return canvas;
}

std::vector<FingerPatch> render_fingers(const SlapSpec& spec, std::uint64_t rng_seed) {
  std::vector<FingerPatch> patches;
  for (std::size_t i = 0; i < spec.fingers.size(); ++i) {
    patches.push_back(synth_fingerprint(spec.fingers[i], derive_seed(rng_seed, i)));
  }
  return patches;
}

}  // namespace

img::GrayImage composite_fingers(const SlapSpec& spec, std::uint64_t rng_seed) {
  return composite(spec, render_fingers(spec, rng_seed));
}

Slap synth_slap(const SlapSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  std::vector<FingerPatch> patches = render_fingers(spec, rng_seed);
  img::GrayImage upright = composite(spec, patches);

  if (spec.noise_sigma > 0.0) {
    Rng noise(derive_seed(rng_seed, "slap-noise"));
    for (std::uint8_t& v : upright.pixels()) v = to_pixel(v + noise.normal(0.0, spec.noise_sigma));
  }

  GroundTruth truth;
  truth.rotation = spec.rotation;
  truth.upright_width = spec.canvas_width;
  truth.upright_height = spec.canvas_height;
  for (std::size_t i = 0; i < spec.fingers.size(); ++i) {
    BinaryMask mask = patches[i].mask.cropped();
    truth.boxes.push_back(mask.hull());
    truth.masks.push_back(std::move(mask));
    truth.labels.push_back(spec.fingers[i].label);
    truth.joint_blobs.push_back(spec.fingers[i].joint_blob);
  }
  return {img::rotate_image(upright, spec.rotation), std::move(truth)};
}

}  // namespace slapseg::synth
