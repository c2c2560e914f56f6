#pragma once

#include <vector>

#include "slapseg/detnet/model.hpp"
#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"

namespace slapseg::det {

/// The network sees slaps rotated upright, centered in a canvas of the
/// input size rounded up to the backbone stride.
struct UprightView {
  img::GrayImage image;
  img::RigidTransform image_to_view;
};

/// `slap_angle` is the rotation the slap carries (the angle that turned the
/// upright hand into the image); the view undoes it.
UprightView make_upright_view(const img::GrayImage& image, double slap_angle);

struct InferConfig {
  int pre_nms_proposals = 1000;
  /// Proposals kept after RPN NMS and scored by the box head.
  int proposals = 300;
  double rpn_nms = 0.7;
  double nms = 0.5;
  double score_threshold = 0.5;
  int max_masks = 50;
  double min_proposal_size = 4.0;
};

struct Detection {
  /// Hull of the detection in the input image frame.
  img::Box box;
  /// Box in the upright view.
  img::Box upright_box;
  double score = 0.0;
  /// m x m foreground probabilities over `upright_box`; empty when the mask
  /// branch was not run for this detection.
  std::vector<double> mask;
};

struct InferResult {
  std::vector<Detection> detections;
  img::RigidTransform image_to_view;
  int view_width = 0;
  int view_height = 0;
  int mask_runs = 0;
};

/// RPN proposals: decode every anchor, clip to the view, drop tiny boxes,
/// keep the `pre_nms` best, suppress at `nms_threshold` and keep `post_nms`.
std::vector<img::ScoredBox> propose(const Forward& fw, int pre_nms, int post_nms, double nms_threshold,
                                    double min_size);

InferResult infer(const ModelParams& params, const img::GrayImage& image, double upright_angle,
                  const InferConfig& cfg = {});

}  // namespace slapseg::det
