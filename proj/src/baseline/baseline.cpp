#include "slapseg/baseline/baseline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "slapseg/common/error.hpp"

namespace slapseg::base {

namespace {

std::vector<double> box_smooth(const std::vector<double>& v, int width) {
  const int half = width / 2;
  const int n = static_cast<int>(v.size());
  std::vector<double> out(v.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    int cnt = 0;
    for (int k = std::max(0, i - half); k <= std::min(n - 1, i + half); ++k) {
      acc += v[k];
      ++cnt;
    }
    out[i] = acc / cnt;
  }
  return out;
}

struct Run {
  int begin = 0;
  int end = 0;  // exclusive
  double mass = 0.0;
};

/// Maximal runs where `v` >= `level`.
std::vector<Run> runs_above(const std::vector<double>& v, double level) {
  std::vector<Run> out;
  int start = -1;
  for (int i = 0; i <= static_cast<int>(v.size()); ++i) {
    const bool on = i < static_cast<int>(v.size()) && v[i] >= level;
    if (on && start < 0) start = i;
    if (!on && start >= 0) {
      Run r{start, i, 0.0};
      for (int k = start; k < i; ++k) r.mass += v[k];
      out.push_back(r);
      start = -1;
    }
  }
  return out;
}

double fold(double a) {
  // Fingers side by side or one finger alone: the axis is only defined
  // modulo a quarter turn.
  while (a > 45.0) a -= 90.0;
  while (a < -45.0) a += 90.0;
  return a;
}

struct Moments {
  double cx = 0, cy = 0, mu20 = 0, mu02 = 0, mu11 = 0;

  bool anisotropic() const {
    const double spread = mu20 + mu02;
    return spread > 0 && std::hypot(mu20 - mu02, 2 * mu11) > 1e-6 * spread;
  }
  /// Counter-clockwise angle of the principal axis, folded. The atan2 angle
  /// is measured with y down, i.e. clockwise on screen.
  double axis_angle() const {
    return fold(-0.5 * std::atan2(2 * mu11, mu20 - mu02) * 180.0 / std::numbers::pi);
  }
};

Moments moments(const std::vector<img::Point>& p, std::size_t lo, std::size_t hi) {
  Moments m;
  const double n = static_cast<double>(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) {
    m.cx += p[i].x;
    m.cy += p[i].y;
  }
  m.cx /= n;
  m.cy /= n;
  for (std::size_t i = lo; i < hi; ++i) {
    const double dx = p[i].x - m.cx;
    const double dy = p[i].y - m.cy;
    m.mu20 += dx * dx;
    m.mu02 += dy * dy;
    m.mu11 += dx * dy;
  }
  return m;
}

/// Angle in [-45, 45] whose upright column histogram has the most energy,
/// i.e. the sharpest finger bands. 1 degree steps.
double sharpest_projection(const std::vector<img::Point>& pts, const Moments& m) {
  double radius = 0.0;
  for (const img::Point& p : pts) radius = std::max(radius, std::hypot(p.x - m.cx, p.y - m.cy));
  std::vector<double> hist(static_cast<std::size_t>(2 * radius) + 3);
  double best = -1.0;
  double best_angle = 0.0;
  for (int deg = -45; deg <= 45; ++deg) {
    const auto undo = img::RigidTransform::rotation(-deg, {m.cx, m.cy}, {0, 0});
    std::fill(hist.begin(), hist.end(), 0.0);
    for (const img::Point& p : pts) hist[static_cast<std::size_t>(undo.apply(p).x + radius + 1)] += 1.0;
    // Energy alone favours whichever direction the slap is narrowest in;
    // scaling by the spread leaves the band contrast.
    double energy = 0.0;
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      energy += hist[i] * hist[i];
      mean += hist[i] * static_cast<double>(i);
      sq += hist[i] * static_cast<double>(i) * static_cast<double>(i);
    }
    const double n = static_cast<double>(pts.size());
    energy *= std::sqrt(std::max(0.0, sq / n - (mean / n) * (mean / n)));
    if (energy > best) {
      best = energy;
      best_angle = deg;
    }
  }
  return best_angle;
}

Binary threshold_at(const img::GrayImage& image, int t) {
  Binary b{image.width(), image.height(), t, {}};
  b.bits.resize(image.pixels().size());
  for (std::size_t i = 0; i < b.bits.size(); ++i) b.bits[i] = image.pixels()[i] <= t ? 1 : 0;
  return b;
}

/// Vertical extent of one column band: the heaviest group of above-level
/// row runs after bridging short gaps.
std::pair<int, int> row_extent(const Binary& fg, int x0, int x1, const BaselineParams& p) {
  std::vector<double> rows(fg.height, 0.0);
  for (int y = 0; y < fg.height; ++y) {
    for (int x = x0; x < x1; ++x) rows[y] += fg.at(x, y);
  }
  const std::vector<double> s = box_smooth(rows, p.row_smoothing);
  const double peak = *std::max_element(s.begin(), s.end());
  std::vector<Run> runs = runs_above(s, p.row_fraction * peak);
  std::vector<Run> merged;
  for (const Run& r : runs) {
    if (!merged.empty() && r.begin - merged.back().end <= p.row_bridge) {
      merged.back().end = r.end;
      merged.back().mass += r.mass;
    } else {
      merged.push_back(r);
    }
  }
  const auto best = std::max_element(merged.begin(), merged.end(),
                                     [](const Run& a, const Run& b) { return a.mass < b.mass; });
  return {best->begin, best->end};
}

}  // namespace

std::size_t Binary::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

int otsu_threshold(const img::GrayImage& image) {
  std::array<double, 256> hist{};
  for (std::uint8_t v : image.pixels()) hist[v] += 1.0;
  const double total = static_cast<double>(image.pixels().size());
  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += v * hist[v];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best = 0.0;
  int best_t = -1;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

Binary binarize(const img::GrayImage& image) { return threshold_at(image, otsu_threshold(image)); }

RotationEstimate estimate_rotation(const Binary& fg) {
  std::vector<img::Point> pts;
  for (int y = 0; y < fg.height; ++y) {
    for (int x = 0; x < fg.width; ++x) {
      if (fg.at(x, y)) pts.push_back({x + 0.5, y + 0.5});
    }
  }
  if (pts.empty()) throw ValidationError("estimate_rotation: empty foreground");
  const Moments all = moments(pts, 0, pts.size());
  RotationEstimate r;
  if (!all.anisotropic()) {
    r.degenerate = true;
    return r;
  }
  // The whole-slap axis is pulled off by uneven finger sizes, stagger and
  // lower phalanges, and is undefined for a square arrangement. Start from
  // the sharpest column profile instead, then refine with the mass-weighted
  // axes of the single-finger bands, each a symmetric elongated blob.
  r.angle = sharpest_projection(pts, all);
  for (int pass = 0; pass < 2; ++pass) {
    const auto undo = img::RigidTransform::rotation(-r.angle, {all.cx, all.cy}, {0, 0});
    std::vector<img::Point> q(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) q[i] = undo.apply(pts[i]);
    std::sort(q.begin(), q.end(), [](const img::Point& a, const img::Point& b) { return a.x < b.x; });
    const double x0 = std::floor(q.front().x);
    std::vector<double> cols(static_cast<std::size_t>(q.back().x - x0) + 1, 0.0);
    for (const img::Point& p : q) cols[static_cast<std::size_t>(p.x - x0)] += 1.0;
    const std::vector<double> s = box_smooth(cols, 9);
    const double peak = *std::max_element(s.begin(), s.end());
    double wsum = 0.0;
    double acc = 0.0;
    std::size_t lo = 0;
    for (const Run& band : runs_above(s, 0.2 * peak)) {
      while (lo < q.size() && q[lo].x < x0 + band.begin) ++lo;
      std::size_t hi = lo;
      while (hi < q.size() && q[hi].x < x0 + band.end) ++hi;
      if (hi - lo < 50) continue;
      const Moments m = moments(q, lo, hi);
      if (!m.anisotropic()) continue;
      acc += m.axis_angle() * static_cast<double>(hi - lo);
      wsum += static_cast<double>(hi - lo);
      lo = hi;
    }
    if (wsum == 0.0) break;
    r.angle = fold(r.angle + acc / wsum);
  }
  return r;
}

RotationEstimate estimate_rotation(const img::GrayImage& image) { return estimate_rotation(binarize(image)); }

BaselineResult baseline_segment(const img::GrayImage& image, const BaselineParams& p) {
  BaselineResult res;
  res.upright_width = image.width();
  res.upright_height = image.height();
  const int t = otsu_threshold(image);
  if (t < 0) return res;
  const Binary fg0 = threshold_at(image, t);
  const RotationEstimate rot = estimate_rotation(fg0);
  res.angle = rot.angle;
  res.degenerate_angle = rot.degenerate;
  res.image_to_upright = img::centered_rotation(image.width(), image.height(), -rot.angle, image.width(),
                                                image.height());
  const img::GrayImage upright = img::rotate_image_into(image, -rot.angle, image.width(), image.height());
  const Binary fg = threshold_at(upright, t);
  if (fg.count() == 0) return res;

  std::vector<double> cols(fg.width, 0.0);
  for (int y = 0; y < fg.height; ++y) {
    for (int x = 0; x < fg.width; ++x) cols[x] += fg.at(x, y);
  }
  const std::vector<double> s = box_smooth(cols, p.column_smoothing);
  const double peak = *std::max_element(s.begin(), s.end());
  std::vector<Run> bands = runs_above(s, p.valley_fraction * peak);
  double heaviest = 0.0;
  for (const Run& b : bands) heaviest = std::max(heaviest, b.mass);
  std::erase_if(bands, [&](const Run& b) { return b.mass < p.min_band_fraction * heaviest; });
  if (static_cast<int>(bands.size()) > p.max_fingers) {
    std::stable_sort(bands.begin(), bands.end(), [](const Run& a, const Run& b) { return a.mass > b.mass; });
    bands.resize(p.max_fingers);
    std::sort(bands.begin(), bands.end(), [](const Run& a, const Run& b) { return a.begin < b.begin; });
  }

  if (bands.size() < 2) {
    const int x0 = bands.empty() ? 0 : bands.front().begin;
    const int x1 = bands.empty() ? fg.width : bands.back().end;
    const auto [y0, y1] = row_extent(fg, x0, x1, p);
    res.boxes.push_back(img::clip_box({double(x0), double(y0), double(x1), double(y1)}, fg.width, fg.height));
    res.confidence.push_back(kSingleBandConfidence);
    return res;
  }
  for (const Run& b : bands) {
    const auto [y0, y1] = row_extent(fg, b.begin, b.end, p);
    res.boxes.push_back(
        img::clip_box({double(b.begin), double(y0), double(b.end), double(y1)}, fg.width, fg.height));
    res.confidence.push_back(b.mass / heaviest);
  }
  return res;
}

}  // namespace slapseg::base
