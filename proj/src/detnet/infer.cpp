#include "slapseg/detnet/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slapseg/detnet/layers.hpp"

namespace slapseg::det {

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

}  // namespace

UprightView make_upright_view(const img::GrayImage& image, double slap_angle) {
  constexpr int s = ModelConfig::kBackboneStride;
  const int w = round_up(image.width(), s);
  const int h = round_up(image.height(), s);
  return {img::rotate_image_into(image, -slap_angle, w, h),
          img::centered_rotation(image.width(), image.height(), -slap_angle, w, h)};
}

std::vector<img::ScoredBox> propose(const Forward& fw, int pre_nms, int post_nms, double nms_threshold,
                                    double min_size) {
  const auto& anchors = fw.anchors();
  const auto& logits = fw.objectness();
  // Non-finite logits (a diverged model) would break the ordering; skip them.
  std::vector<std::size_t> order;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (std::isfinite(logits[a])) order.push_back(a);
  }
  const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(pre_nms));
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](std::size_t a, std::size_t b) {
    return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
  });
  const double w = fw.image_width();
  const double h = fw.image_height();
  std::vector<img::ScoredBox> cand;
  cand.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t a = order[i];
    img::Box b = decode_deltas(denormalize_deltas(fw.rpn_deltas()[a]), anchors[a]);
    b = {std::clamp(b.left, 0.0, w), std::clamp(b.top, 0.0, h), std::clamp(b.right, 0.0, w),
         std::clamp(b.bottom, 0.0, h)};
    if (!(b.width() >= min_size) || !(b.height() >= min_size)) continue;
    cand.push_back({b, sigmoid(logits[a])});
  }
  std::vector<img::ScoredBox> out = img::nms(cand, nms_threshold);
  if (out.size() > static_cast<std::size_t>(post_nms)) out.resize(post_nms);
  return out;
}

InferResult infer(const ModelParams& params, const img::GrayImage& image, double upright_angle,
                  const InferConfig& cfg) {
  const UprightView view = make_upright_view(image, upright_angle);
  InferResult res;
  res.image_to_view = view.image_to_view;
  res.view_width = view.image.width();
  res.view_height = view.image.height();

  const Forward fw(params, image_to_input(view.image));
  const auto proposals =
      propose(fw, cfg.pre_nms_proposals, cfg.proposals, cfg.rpn_nms, cfg.min_proposal_size);
  if (proposals.empty()) return res;
  std::vector<img::Box> rois;
  for (const auto& p : proposals) rois.push_back(p.box);
  const BoxHeadOut head = fw.box_head(rois);

  const double w = view.image.width();
  const double h = view.image.height();
  std::vector<img::ScoredBox> scored;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const double score = sigmoid(head.logits[i]);
    if (score < cfg.score_threshold) continue;
    img::Box b = decode_deltas(denormalize_deltas(head.deltas[i]), rois[i]);
    b = {std::clamp(b.left, 0.0, w), std::clamp(b.top, 0.0, h), std::clamp(b.right, 0.0, w),
         std::clamp(b.bottom, 0.0, h)};
    if (!b.valid()) continue;
    scored.push_back({b, score});
  }
  const std::vector<img::ScoredBox> kept = img::nms(scored, cfg.nms);

  const std::size_t n_masks = std::min<std::size_t>(kept.size(), static_cast<std::size_t>(cfg.max_masks));
  std::vector<img::Box> mask_rois;
  for (std::size_t i = 0; i < n_masks; ++i) mask_rois.push_back(kept[i].box);
  const auto mask_logits = fw.mask_head(mask_rois);
  res.mask_runs = static_cast<int>(mask_logits.size());

  const img::RigidTransform view_to_image = view.image_to_view.inverse();
  const std::size_t cells = static_cast<std::size_t>(params.config.mask_size()) * params.config.mask_size();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Detection d;
    d.upright_box = kept[i].box;
    d.box = img::transform_box(kept[i].box, view_to_image);
    d.score = kept[i].score;
    if (i < mask_logits.size()) {
      d.mask.resize(cells);
      for (std::size_t c = 0; c < cells; ++c) d.mask[c] = sigmoid(mask_logits[i][c]);
    }
    res.detections.push_back(std::move(d));
  }
  return res;
}

}  // namespace slapseg::det
