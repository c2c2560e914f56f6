#include "slapseg/synthgen/finger.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"

namespace slapseg::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRidgeLevel = 25.0;
constexpr double kValleyLevel = 210.0;
// Fraction of the envelope radius where ridge contrast starts to fade, and
// the contrast left at the rim.
constexpr double kFadeStart = 0.6;
constexpr double kRimContrast = 0.15;
constexpr double kCreaseGap = 0.07;
constexpr double kBlobHeight = 0.75;
constexpr double kBlobWidth = 0.9;

struct Identity {
  img::Point core;  // relative to the envelope center
  double phase0 = 0.0;
  std::array<double, 2> warp_amp{};
  std::array<double, 2> warp_len{};
  std::array<double, 2> warp_dir{};
  std::array<double, 2> warp_shift{};
  double blob_tilt = 0.0;
  double blob_phase = 0.0;
};

Identity make_identity(const FingerSpec& s) {
  Rng rng(derive_seed(s.orientation_seed, "finger-identity"));
  Identity id;
  const double dist = rng.uniform(0.3, 2.5) * s.height;
  const double ang = rng.uniform(0.0, kTwoPi);
  id.core = {dist * std::cos(ang), dist * std::sin(ang)};
  id.phase0 = rng.uniform(0.0, kTwoPi);
  for (int k = 0; k < 2; ++k) {
    id.warp_amp[k] = rng.uniform(0.3, 0.6);
    id.warp_len[k] = rng.uniform(6.0, 10.0) * s.ridge_period;
    id.warp_dir[k] = rng.uniform(0.0, kTwoPi);
    id.warp_shift[k] = rng.uniform(0.0, kTwoPi);
  }
  id.blob_tilt = rng.uniform(-0.15, 0.15);
  id.blob_phase = rng.uniform(0.0, kTwoPi);
  return id;
}

double ridge_phase(const Identity& id, double period, double dx, double dy) {
  const double r = std::hypot(dx - id.core.x, dy - id.core.y);
  double phase = kTwoPi * r / period + id.phase0;
  for (int k = 0; k < 2; ++k) {
    const double u = dx * std::cos(id.warp_dir[k]) + dy * std::sin(id.warp_dir[k]);
    phase += id.warp_amp[k] * std::sin(kTwoPi * u / id.warp_len[k] + id.warp_shift[k]);
  }
  return phase;
}

double shade(bool ridge, double contrast) {
  const double level = ridge ? kRidgeLevel : kValleyLevel;
  return 255.0 - contrast * (255.0 - level);
}

}  // namespace

std::string_view to_string(FingerLabel v) {
  switch (v) {
    case FingerLabel::kIndex: return "index";
    case FingerLabel::kMiddle: return "middle";
    case FingerLabel::kRing: return "ring";
    case FingerLabel::kLittle: return "little";
    case FingerLabel::kThumb: return "thumb";
  }
  return "index";
}

std::string_view to_string(Cohort v) { return v == Cohort::kAdult ? "adult" : "juvenile"; }

std::string_view to_string(Hand v) {
  switch (v) {
    case Hand::kLeft: return "left";
    case Hand::kRight: return "right";
    case Hand::kThumbs: return "thumbs";
  }
  return "left";
}

FingerLabel parse_finger_label(std::string_view s) {
  for (FingerLabel l : {FingerLabel::kIndex, FingerLabel::kMiddle, FingerLabel::kRing, FingerLabel::kLittle,
                        FingerLabel::kThumb}) {
    if (to_string(l) == s) return l;
  }
  throw ParseError("unknown finger label '" + std::string(s) + "'");
}

Cohort parse_cohort(std::string_view s) {
  if (s == "adult") return Cohort::kAdult;
  if (s == "juvenile") return Cohort::kJuvenile;
  throw ParseError("unknown cohort '" + std::string(s) + "'");
}

Hand parse_hand(std::string_view s) {
  for (Hand h : {Hand::kLeft, Hand::kRight, Hand::kThumbs}) {
    if (to_string(h) == s) return h;
  }
  throw ParseError("unknown hand '" + std::string(s) + "'");
}

void FingerSpec::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("finger width and height must be positive");
  if (!(ridge_period >= 4.0)) throw ValidationError("ridge_period must be at least 4 px");
  if (!std::isfinite(center.x) || !std::isfinite(center.y)) throw ValidationError("finger center must be finite");
}

img::Box FingerSpec::envelope_box() const {
  return {center.x - width / 2, center.y - height / 2, center.x + width / 2, center.y + height / 2};
}

img::Box FingerSpec::footprint() const {
  img::Box b = envelope_box();
  if (joint_blob) {
    b.bottom += height * (kCreaseGap + kBlobHeight);
  }
  return b;
}

std::size_t BinaryMask::area() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

img::Box BinaryMask::hull() const {
  int minx = width, miny = height, maxx = -1, maxy = -1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!at(x, y)) continue;
      minx = std::min(minx, x);
      maxx = std::max(maxx, x);
      miny = std::min(miny, y);
      maxy = std::max(maxy, y);
    }
  }
  if (maxx < 0) throw ValidationError("mask is empty");
  return {static_cast<double>(x0 + minx), static_cast<double>(y0 + miny), static_cast<double>(x0 + maxx + 1),
          static_cast<double>(y0 + maxy + 1)};
}

BinaryMask BinaryMask::cropped() const {
  const img::Box h = hull();
  BinaryMask out;
  out.x0 = static_cast<int>(h.left);
  out.y0 = static_cast<int>(h.top);
  out.width = static_cast<int>(h.width());
  out.height = static_cast<int>(h.height());
  out.bits.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.bits[static_cast<std::size_t>(y) * out.width + x] = at(x + out.x0 - x0, y + out.y0 - y0) ? 1 : 0;
    }
  }
  return out;
}

FingerPatch synth_fingerprint(const FingerSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  const Identity id = make_identity(spec);
  Rng capture(derive_seed(rng_seed, "finger-capture"));
  const double pressure = capture.uniform(0.85, 1.0);
  const double fade_start = kFadeStart + capture.uniform(-0.05, 0.05);

  const img::Box fp = spec.footprint();
  const int x0 = static_cast<int>(std::floor(fp.left)) - 1;
  const int y0 = static_cast<int>(std::floor(fp.top)) - 1;
  const int x1 = static_cast<int>(std::ceil(fp.right)) + 1;
  const int y1 = static_cast<int>(std::ceil(fp.bottom)) + 1;
  const int w = x1 - x0;
  const int h = y1 - y0;

  FingerPatch out{img::GrayImage(w, h, 255), x0, y0, BinaryMask{x0, y0, w, h, {}}};
  out.mask.bits.assign(static_cast<std::size_t>(w) * h, 0);

  const double a = spec.width / 2;
  const double b = spec.height / 2;
  const double blob_top = spec.center.y + b + spec.height * kCreaseGap;
  const double blob_hh = spec.height * kBlobHeight / 2;
  const double blob_hw = spec.width * kBlobWidth / 2;
  const double blob_cy = blob_top + blob_hh;

  for (int py = 0; py < h; ++py) {
    const double y = y0 + py + 0.5;
    for (int px = 0; px < w; ++px) {
      const double x = x0 + px + 0.5;
      const double dx = x - spec.center.x;
      const double dy = y - spec.center.y;
      const double rho = std::sqrt((dx / a) * (dx / a) + (dy / b) * (dy / b));
      double value = 255.0;
      if (rho <= 1.0) {
        const double contrast =
            rho <= fade_start ? 1.0 : 1.0 - (1.0 - kRimContrast) * (rho - fade_start) / (1.0 - fade_start);
        const bool ridge = std::cos(ridge_phase(id, spec.ridge_period, dx, dy)) > -0.1;
        value = shade(ridge, pressure * contrast);
        out.mask.bits[static_cast<std::size_t>(py) * w + px] = 1;
      } else if (spec.joint_blob) {
        const double bx = dx / blob_hw;
        const double by = (y - blob_cy) / blob_hh;
        if (bx * bx * bx * bx + by * by * by * by <= 1.0) {
          const double u = (y - blob_cy) * std::cos(id.blob_tilt) + dx * std::sin(id.blob_tilt);
          const bool ridge = std::cos(kTwoPi * u / spec.ridge_period + id.blob_phase) > -0.1;
          value = shade(ridge, 0.8 * pressure);
        }
      }
      out.image.at(px, py) = static_cast<std::uint8_t>(std::lround(value));
    }
  }
  return out;
}

}  // namespace slapseg::synth
