#include "slapseg/detnet/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "slapseg/common/error.hpp"

namespace slapseg::det {

namespace {
// Caps exp() in decoding so a wild prediction cannot overflow.
const double kMaxLogScale = std::log(1000.0 / 16.0);
}  // namespace

void AnchorConfig::validate() const {
  if (stride <= 0) throw ValidationError("anchor stride must be positive");
  for (double s : scales) {
    if (!(s > 0)) throw ValidationError("anchor scales must be positive");
  }
  for (double r : ratios) {
    if (!(r > 0)) throw ValidationError("anchor ratios must be positive");
  }
}

std::vector<img::Box> generate_anchors(int image_width, int image_height, const AnchorConfig& cfg) {
  cfg.validate();
  const int gw = image_width / cfg.stride;
  const int gh = image_height / cfg.stride;
  if (gw < 1 || gh < 1) throw ValidationError("image smaller than one anchor stride");
  std::vector<img::Box> out;
  out.reserve(static_cast<std::size_t>(gw) * gh * AnchorConfig::kPerPosition);
  for (int i = 0; i < gh; ++i) {
    const double cy = (i + 0.5) * cfg.stride;
    for (int j = 0; j < gw; ++j) {
      const double cx = (j + 0.5) * cfg.stride;
      for (double s : cfg.scales) {
        for (double r : cfg.ratios) {
          const double w = s * std::sqrt(r);
          const double h = s / std::sqrt(r);
          out.push_back({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
        }
      }
    }
  }
  return out;
}

AnchorMatch label_anchors(std::span<const img::Box> anchors, std::span<const img::Box> gt, const AnchorThresholds& th) {
  if (gt.empty()) throw ValidationError("label_anchors needs at least one ground-truth box");
  const std::size_t n = anchors.size();
  AnchorMatch m;
  m.labels.assign(n, AnchorLabel::kNeutral);
  m.matched.assign(n, -1);
  m.max_iou.assign(n, 0.0);
  const std::size_t ng = gt.size();
  std::vector<double> ious(n * ng);
  for (std::size_t a = 0; a < n; ++a) {
    int argmax = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      const double v = iou(anchors[a], gt[g]);
      ious[a * ng + g] = v;
      if (v > m.max_iou[a]) {
        m.max_iou[a] = v;
        argmax = static_cast<int>(g);
      }
    }
    if (m.max_iou[a] > th.positive) {
      m.labels[a] = AnchorLabel::kPositive;
      m.matched[a] = argmax;
    } else if (m.max_iou[a] < th.negative) {
      m.labels[a] = AnchorLabel::kNegative;
    }
  }
  // Each truth box claims its best anchor not already claimed by an earlier
  // box, so two boxes sharing a best anchor both keep a positive.
  std::vector<char> claimed(n, 0);
  for (std::size_t g = 0; g < ng; ++g) {
    double best = -1.0;
    std::size_t at = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!claimed[a] && ious[a * ng + g] > best) {
        best = ious[a * ng + g];
        at = a;
      }
    }
    if (at == n) break;
    claimed[at] = 1;
    m.labels[at] = AnchorLabel::kPositive;
    m.matched[at] = static_cast<int>(g);
  }
  return m;
}

Deltas encode_deltas(const img::Box& box, const img::Box& anchor) {
  const double wa = anchor.width();
  const double ha = anchor.height();
  const img::Point cb = box.center();
  const img::Point ca = anchor.center();
  return {(cb.x - ca.x) / wa, (cb.y - ca.y) / ha, std::log(box.width() / wa), std::log(box.height() / ha)};
}

Deltas encode_deltas_checked(const img::Box& box, const img::Box& anchor) {
  if (!box.valid() || !anchor.valid()) throw ValidationError("encode_deltas needs valid boxes");
  return encode_deltas(box, anchor);
}

img::Box decode_deltas(const Deltas& t, const img::Box& anchor) {
  const double wa = anchor.width();
  const double ha = anchor.height();
  const img::Point ca = anchor.center();
  const double cx = ca.x + t[0] * wa;
  const double cy = ca.y + t[1] * ha;
  const double w = wa * std::exp(std::min(t[2], kMaxLogScale));
  const double h = ha * std::exp(std::min(t[3], kMaxLogScale));
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

Deltas normalize_deltas(const Deltas& t) {
  return {t[0] / kDeltaStd[0], t[1] / kDeltaStd[1], t[2] / kDeltaStd[2], t[3] / kDeltaStd[3]};
}

Deltas denormalize_deltas(const Deltas& t) {
  return {t[0] * kDeltaStd[0], t[1] * kDeltaStd[1], t[2] * kDeltaStd[2], t[3] * kDeltaStd[3]};
}

}  // namespace slapseg::det
