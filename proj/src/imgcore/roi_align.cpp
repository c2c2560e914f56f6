#include "slapseg/imgcore/roi_align.hpp"

#include <algorithm>
#include <cmath>

#include "slapseg/common/error.hpp"

namespace slapseg::img {

namespace {

struct Tap {
  std::size_t idx[4];
  double w[4];
};

double clamp_coord(double v, int extent) { return std::clamp(v - 0.5, 0.0, static_cast<double>(extent - 1)); }

Tap make_tap(double x, double y, int height, int width) {
  const double u = clamp_coord(x, width);
  const double v = clamp_coord(y, height);
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = u - x0;
  const double ay = v - y0;
  Tap t{};
  t.idx[0] = static_cast<std::size_t>(y0) * width + x0;
  t.idx[1] = static_cast<std::size_t>(y0) * width + x1;
  t.idx[2] = static_cast<std::size_t>(y1) * width + x0;
  t.idx[3] = static_cast<std::size_t>(y1) * width + x1;
  t.w[0] = (1.0 - ax) * (1.0 - ay);
  t.w[1] = ax * (1.0 - ay);
  t.w[2] = (1.0 - ax) * ay;
  t.w[3] = ax * ay;
  return t;
}

// Taps grouped by output bin: taps[bin * S^2 + k].
std::vector<Tap> build_taps(int height, int width, const Box& roi, const RoiAlignParams& p) {
  if (p.out_size < 1 || p.samples_per_bin < 1) throw ValidationError("roi_align: out_size and samples_per_bin must be >= 1");
  if (!roi.valid()) throw DegenerateRoiError("roi_align: invalid roi");
  if (roi.right <= 0.0 || roi.bottom <= 0.0 || roi.left >= width || roi.top >= height) {
    throw DegenerateRoiError("roi_align: roi does not overlap the feature grid");
  }
  const int m = p.out_size;
  const int s = p.samples_per_bin;
  const double bw = roi.width() / m;
  const double bh = roi.height() / m;
  std::vector<Tap> taps;
  taps.reserve(static_cast<std::size_t>(m) * m * s * s);
  for (int by = 0; by < m; ++by) {
    for (int bx = 0; bx < m; ++bx) {
      for (int sy = 0; sy < s; ++sy) {
        const double y = roi.top + bh * (by + (sy + 0.5) / s);
        for (int sx = 0; sx < s; ++sx) {
          const double x = roi.left + bw * (bx + (sx + 0.5) / s);
          taps.push_back(make_tap(x, y, height, width));
        }
      }
    }
  }
  return taps;
}

}  // namespace

std::vector<double> roi_align(const FeatureView& f, const Box& roi, const RoiAlignParams& p) {
  const auto taps = build_taps(f.height, f.width, roi, p);
  const int m = p.out_size;
  const std::size_t per_bin = static_cast<std::size_t>(p.samples_per_bin) * p.samples_per_bin;
  const double inv = 1.0 / static_cast<double>(per_bin);
  const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
  std::vector<double> out(static_cast<std::size_t>(f.channels) * m * m, 0.0);
  for (int c = 0; c < f.channels; ++c) {
    const double* src = f.data.data() + c * plane;
    double* dst = out.data() + static_cast<std::size_t>(c) * m * m;
    for (std::size_t bin = 0; bin < static_cast<std::size_t>(m) * m; ++bin) {
      double acc = 0.0;
      for (std::size_t k = 0; k < per_bin; ++k) {
        const Tap& t = taps[bin * per_bin + k];
        acc += t.w[0] * src[t.idx[0]] + t.w[1] * src[t.idx[1]] + t.w[2] * src[t.idx[2]] + t.w[3] * src[t.idx[3]];
      }
      dst[bin] = acc * inv;
    }
  }
  return out;
}

void roi_align_backward(int channels, int height, int width, const Box& roi, const RoiAlignParams& p,
                        std::span<const double> grad_output, std::span<double> grad_features) {
  const auto taps = build_taps(height, width, roi, p);
  const int m = p.out_size;
  const std::size_t per_bin = static_cast<std::size_t>(p.samples_per_bin) * p.samples_per_bin;
  const double inv = 1.0 / static_cast<double>(per_bin);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    double* dst = grad_features.data() + c * plane;
    const double* g = grad_output.data() + static_cast<std::size_t>(c) * m * m;
    for (std::size_t bin = 0; bin < static_cast<std::size_t>(m) * m; ++bin) {
      const double gb = g[bin] * inv;
      if (gb == 0.0) continue;
      for (std::size_t k = 0; k < per_bin; ++k) {
        const Tap& t = taps[bin * per_bin + k];
        for (int q = 0; q < 4; ++q) dst[t.idx[q]] += t.w[q] * gb;
      }
    }
  }
}

}  // namespace slapseg::img
