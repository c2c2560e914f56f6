#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace slapseg::img {

/// 8-bit single-channel raster, row-major. Resolution travels with the
/// image in memory; on disk it lives in the dataset manifest.
class GrayImage {
 public:
  static constexpr double kDefaultPpi = 500.0;

  /// Throws ValidationError unless width, height >= 1 and ppi > 0.
  GrayImage(int width, int height, std::uint8_t fill = 255, double ppi = kDefaultPpi);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels, double ppi = kDefaultPpi);

  int width() const { return width_; }
  int height() const { return height_; }
  double ppi() const { return ppi_; }
  void set_ppi(double ppi);

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_;
  int height_;
  double ppi_;
  std::vector<std::uint8_t> pixels_;
};

/// Bilinear sample at a continuous position; pixel (i, j) has its center at
/// (j + 0.5, i + 0.5). Samples outside the raster blend toward `background`.
double sample_bilinear(const GrayImage& img, double x, double y, double background = 255.0);

/// Crops the continuous rectangle [left,right)x[top,bottom) and resamples it
/// to out_w x out_h with bilinear interpolation.
GrayImage resample_region(const GrayImage& img, double left, double top, double right, double bottom,
                          int out_w, int out_h);

}  // namespace slapseg::img
