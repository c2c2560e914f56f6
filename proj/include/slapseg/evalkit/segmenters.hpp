#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slapseg/baseline/baseline.hpp"
#include "slapseg/detnet/infer.hpp"
#include "slapseg/detnet/model.hpp"
#include "slapseg/synthgen/manifest.hpp"

namespace slapseg::eval {

/// Boxes in the segmenter's own frame plus the map from that frame into the
/// input image.
struct Segmentation {
  std::vector<img::Box> boxes;
  std::vector<double> scores;
  img::RigidTransform frame_to_image;
};

/// The record supplies capture metadata (the hand, hence the finger count);
/// only the ground-truth segmenter reads its truth.
using SegmentFn = std::function<Segmentation(const img::GrayImage& image, const synth::SlapRecord& rec)>;

struct Segmenter {
  std::string name;
  SegmentFn run;
};

int expected_fingers(synth::Hand hand);

/// Annotation frame -> image pixels for a slap.
img::RigidTransform truth_to_image(const synth::GroundTruth& truth, const img::GrayImage& image);

Segmenter baseline_segmenter(const base::BaselineParams& params = {});
/// Rotation comes from the baseline estimate; the most confident
/// detections, up to the hand's finger count, are kept.
Segmenter detnet_segmenter(std::string name, std::shared_ptr<const det::ModelParams> params,
                           const det::InferConfig& cfg = {});
/// The oracle condition: the annotated boxes themselves.
Segmenter ground_truth_segmenter();

}  // namespace slapseg::eval
