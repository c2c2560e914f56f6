#include "slapseg/imgcore/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "slapseg/common/error.hpp"

namespace slapseg::img {

Box Box::checked(double left, double top, double right, double bottom) {
  Box b{left, top, right, bottom};
  if (!b.valid()) throw ValidationError("invalid box: requires left < right and top < bottom, all finite");
  return b;
}

bool Box::valid() const {
  return std::isfinite(left) && std::isfinite(top) && std::isfinite(right) && std::isfinite(bottom) &&
         left < right && top < bottom;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

std::vector<std::size_t> nms_indices(std::span<const ScoredBox> candidates, double iou_threshold) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(candidates[idx].box, candidates[k].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> candidates, double iou_threshold) {
  std::vector<ScoredBox> out;
  for (std::size_t idx : nms_indices(candidates, iou_threshold)) out.push_back(candidates[idx]);
  return out;
}

RigidTransform::RigidTransform(double angle_deg, double tx, double ty)
    : angle_deg_(angle_deg), tx_(tx), ty_(ty) {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  cos_ = std::cos(rad);
  sin_ = std::sin(rad);
  // Exact quarter turns keep integer geometry exact.
  const double q = angle_deg / 90.0;
  if (q == std::round(q)) {
    const long k = ((static_cast<long>(std::round(q)) % 4) + 4) % 4;
    static constexpr std::array<double, 4> kCos{1.0, 0.0, -1.0, 0.0};
    static constexpr std::array<double, 4> kSin{0.0, 1.0, 0.0, -1.0};
    cos_ = kCos[k];
    sin_ = kSin[k];
  }
}

RigidTransform RigidTransform::rotation(double angle_deg, Point src_pivot, Point dst_pivot) {
  RigidTransform r(angle_deg, 0.0, 0.0);
  const Point rs = r.apply(src_pivot);
  r.tx_ = dst_pivot.x - rs.x;
  r.ty_ = dst_pivot.y - rs.y;
  return r;
}

RigidTransform RigidTransform::translation(double dx, double dy) { return RigidTransform(0.0, dx, dy); }

Point RigidTransform::apply(Point p) const {
  return {cos_ * p.x + sin_ * p.y + tx_, -sin_ * p.x + cos_ * p.y + ty_};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform r(-angle_deg_, 0.0, 0.0);
  const Point t = r.apply({tx_, ty_});
  r.tx_ = -t.x;
  r.ty_ = -t.y;
  return r;
}

RigidTransform RigidTransform::then(const RigidTransform& next) const {
  RigidTransform r(angle_deg_ + next.angle_deg_, 0.0, 0.0);
  const Point t = next.apply({tx_, ty_});
  r.tx_ = t.x;
  r.ty_ = t.y;
  return r;
}

Box transform_box(const Box& box, const RigidTransform& t) {
  const std::array<Point, 4> corners{Point{box.left, box.top}, Point{box.right, box.top},
                                     Point{box.right, box.bottom}, Point{box.left, box.bottom}};
  Box out{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const Point& c : corners) {
    const Point p = t.apply(c);
    out.left = std::min(out.left, p.x);
    out.top = std::min(out.top, p.y);
    out.right = std::max(out.right, p.x);
    out.bottom = std::max(out.bottom, p.y);
  }
  return out;
}

Box rotate_box(const Box& box, double angle_deg, Point pivot) {
  return transform_box(box, RigidTransform::rotation(angle_deg, pivot, pivot));
}

Box clip_box(const Box& box, double width, double height) {
  if (box.right <= 0.0 || box.bottom <= 0.0 || box.left >= width || box.top >= height) {
    throw ValidationError("box lies entirely outside the image bounds");
  }
  return {std::clamp(box.left, 0.0, width), std::clamp(box.top, 0.0, height), std::clamp(box.right, 0.0, width),
          std::clamp(box.bottom, 0.0, height)};
}

RigidTransform centered_rotation(int src_w, int src_h, double angle_deg, int dst_w, int dst_h) {
  return RigidTransform::rotation(angle_deg, {src_w * 0.5, src_h * 0.5}, {dst_w * 0.5, dst_h * 0.5});
}

RotationFrame rotation_frame(int width, int height, double angle_deg) {
  const RigidTransform probe = RigidTransform::rotation(angle_deg, {0.0, 0.0}, {0.0, 0.0});
  const Box extent = transform_box(Box{0.0, 0.0, static_cast<double>(width), static_cast<double>(height)}, probe);
  RotationFrame f;
  f.out_width = std::max(1, static_cast<int>(std::ceil(extent.width() - 1e-9)));
  f.out_height = std::max(1, static_cast<int>(std::ceil(extent.height() - 1e-9)));
  f.src_to_dst = centered_rotation(width, height, angle_deg, f.out_width, f.out_height);
  return f;
}

GrayImage rotate_image_into(const GrayImage& img, double angle_deg, int out_width, int out_height) {
  if (!std::isfinite(angle_deg)) throw ValidationError("rotation angle must be finite");
  GrayImage out(out_width, out_height, 255, img.ppi());
  const RigidTransform back = centered_rotation(img.width(), img.height(), angle_deg, out_width, out_height).inverse();
  for (int i = 0; i < out_height; ++i) {
    for (int j = 0; j < out_width; ++j) {
      const Point p = back.apply({j + 0.5, i + 0.5});
      const double v = sample_bilinear(img, p.x, p.y, 255.0);
      out.at(j, i) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

GrayImage rotate_image(const GrayImage& img, double angle_deg) {
  if (!std::isfinite(angle_deg)) throw ValidationError("rotation angle must be finite");
  if (angle_deg == 0.0) return img;
  const RotationFrame f = rotation_frame(img.width(), img.height(), angle_deg);
  return rotate_image_into(img, angle_deg, f.out_width, f.out_height);
}

}  // namespace slapseg::img
