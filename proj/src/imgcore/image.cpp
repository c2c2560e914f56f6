#include "slapseg/imgcore/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slapseg/common/error.hpp"

namespace slapseg::img {

namespace {

void check_dims(int width, int height, double ppi) {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (!(ppi > 0.0) || !std::isfinite(ppi)) throw ValidationError("ppi must be positive");
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill, double ppi)
    : width_(width), height_(height), ppi_(ppi) {
  check_dims(width, height, ppi);
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels, double ppi)
    : width_(width), height_(height), ppi_(ppi), pixels_(std::move(pixels)) {
  check_dims(width, height, ppi);
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("pixel count does not match image dimensions");
  }
}

void GrayImage::set_ppi(double ppi) {
  if (!(ppi > 0.0) || !std::isfinite(ppi)) throw ValidationError("ppi must be positive");
  ppi_ = ppi;
}

double sample_bilinear(const GrayImage& img, double x, double y, double background) {
  const double u = x - 0.5;
  const double v = y - 0.5;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const int x0 = static_cast<int>(fu);
  const int y0 = static_cast<int>(fv);
  const double ax = u - fu;
  const double ay = v - fv;
  auto value = [&](int px, int py) -> double {
    if (px < 0 || py < 0 || px >= img.width() || py >= img.height()) return background;
    return img.at(px, py);
  };
  const double top = value(x0, y0) * (1.0 - ax) + value(x0 + 1, y0) * ax;
  const double bottom = value(x0, y0 + 1) * (1.0 - ax) + value(x0 + 1, y0 + 1) * ax;
  return top * (1.0 - ay) + bottom * ay;
}

GrayImage resample_region(const GrayImage& img, double left, double top, double right, double bottom,
                          int out_w, int out_h) {
  GrayImage out(out_w, out_h, 255, img.ppi());
  const double sx = (right - left) / out_w;
  const double sy = (bottom - top) / out_h;
  for (int i = 0; i < out_h; ++i) {
    const double y = top + (i + 0.5) * sy;
    for (int j = 0; j < out_w; ++j) {
      const double x = left + (j + 0.5) * sx;
      const double v = sample_bilinear(img, x, y);
      out.at(j, i) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace slapseg::img
