#pragma once

#include <span>
#include <vector>

#include "slapseg/imgcore/image.hpp"

namespace slapseg::img {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle with sub-pixel edges; x grows right, y grows down.
/// A valid box has left < right and top < bottom.
struct Box {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  /// Builds a box and throws ValidationError when it would be invalid.
  static Box checked(double left, double top, double right, double bottom);

  bool valid() const;
  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() * height(); }
  Point center() const { return {(left + right) * 0.5, (top + bottom) * 0.5}; }
  Box translated(double dx, double dy) const { return {left + dx, top + dy, right + dx, bottom + dy}; }
  bool contains(const Box& other) const {
    return left <= other.left && top <= other.top && right >= other.right && bottom >= other.bottom;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct ScoredBox {
  Box box;
  double score = 0.0;
};

double iou(const Box& a, const Box& b);

/// Greedy non-maximum suppression. A candidate is dropped when its IoU with
/// an already kept, higher-scored box exceeds `iou_threshold`. Equal scores
/// keep input order. Returns indices into `candidates`, best first.
std::vector<std::size_t> nms_indices(std::span<const ScoredBox> candidates, double iou_threshold);
std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold);

/// Rigid motion p' = R(angle) p + t. Positive angles turn content
/// counter-clockwise as displayed (y down).
class RigidTransform {
 public:
  RigidTransform() = default;

  /// Rotation by `angle_deg` that sends `src_pivot` to `dst_pivot`.
  static RigidTransform rotation(double angle_deg, Point src_pivot, Point dst_pivot);
  static RigidTransform translation(double dx, double dy);

  Point apply(Point p) const;
  RigidTransform inverse() const;
  /// Transform that applies *this first, then `next`.
  RigidTransform then(const RigidTransform& next) const;

  double angle_deg() const { return angle_deg_; }
  Point offset() const { return {tx_, ty_}; }

 private:
  RigidTransform(double angle_deg, double tx, double ty);

  double angle_deg_ = 0.0;
  double cos_ = 1.0;
  double sin_ = 0.0;
  double tx_ = 0.0;
  double ty_ = 0.0;
};

/// Axis-aligned hull of the transformed corners.
Box transform_box(const Box& box, const RigidTransform& t);
Box rotate_box(const Box& box, double angle_deg, Point pivot);

/// Clamps into [0,width]x[0,height]; throws ValidationError when the box
/// does not overlap that area.
Box clip_box(const Box& box, double width, double height);

/// Geometry of rotating a width x height raster about its center into a
/// canvas large enough for the rotated extent.
struct RotationFrame {
  int out_width = 0;
  int out_height = 0;
  RigidTransform src_to_dst;
};

RotationFrame rotation_frame(int width, int height, double angle_deg);

/// Rotation about the image center with bilinear resampling into an
/// expanded canvas; uncovered pixels are white.
GrayImage rotate_image(const GrayImage& img, double angle_deg);

/// Same rotation, but centered in a caller-sized canvas.
GrayImage rotate_image_into(const GrayImage& img, double angle_deg, int out_width, int out_height);
RigidTransform centered_rotation(int src_w, int src_h, double angle_deg, int dst_w, int dst_h);

}  // namespace slapseg::img
