#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "slapseg/common/rng.hpp"
#include "slapseg/detnet/model.hpp"
#include "slapseg/detnet/sgd.hpp"
#include "slapseg/synthgen/manifest.hpp"
#include "slapseg/synthgen/splits.hpp"

namespace slapseg::det {

struct TrainConfig {
  SgdConfig sgd;
  int rois_per_image = 64;
  double positive_fraction = 0.25;
  int epochs = 12;
  std::uint64_t rng_seed = 0;
  /// Anchors sampled per image for the RPN terms, half positive at most.
  int rpn_batch = 128;
  double rpn_positive_fraction = 0.5;
  int train_pre_nms = 2000;
  int train_proposals = 300;
  double lambda = 1.0;
  /// Uniform perturbation (degrees) of the upright angle, so the detector
  /// tolerates rotation estimates that are slightly off.
  double angle_jitter = 2.0;
  /// Where to leave the last good parameters if training diverges.
  std::filesystem::path last_good_path;

  void validate() const;
};

/// A ground-truth finger in the network view.
struct GtInstance {
  img::Box box;
  /// Fingertip mask in the annotation frame, or null for box-only truth
  /// (the inscribed ellipse stands in as the mask target then).
  const synth::BinaryMask* mask = nullptr;
  img::Box truth_box;
};

struct TrainSample {
  Tensor input;
  std::vector<GtInstance> gt;
  img::RigidTransform view_to_truth;
};

/// Builds the network input and view-frame targets for a slap; the view is
/// rotated by truth.rotation + angle_offset.
TrainSample make_train_sample(const img::GrayImage& image, const synth::GroundTruth& truth, double angle_offset);

struct RoiDraw {
  img::Box roi;
  int gt = -1;  // matched ground truth for positives
  double iou = 0.0;
};

/// At most n * positive_fraction positives (IoU >= 0.5 with some ground
/// truth); the rest negatives, which also fill any positive deficit.
std::vector<RoiDraw> sample_rois(std::span<const img::Box> proposals, std::span<const img::Box> gt, int n,
                                 double positive_fraction, Rng& rng);

/// Mask target on an m x m grid over `roi` (view frame).
MaskTarget mask_target(const GtInstance& gt, const img::Box& roi, const img::RigidTransform& view_to_truth, int m);

SamplingPlan make_plan(const Forward& fw, const TrainSample& sample, const TrainConfig& cfg, int mask_size, Rng& rng);

struct EpochLoss {
  int epoch = 0;
  LossBreakdown mean;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLoss> curve;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

TrainResult train(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                  const TrainConfig& cfg, const ModelConfig& model = {}, const EpochCallback& on_epoch = {});
TrainResult train(const synth::DatasetManifest& manifest, const synth::SplitAssignment& split,
                  const TrainConfig& cfg, const ModelConfig& model = {}, const EpochCallback& on_epoch = {});

/// Loss of the initial parameters on the first `images` slaps, before any
/// update.
LossBreakdown initial_loss(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                           const TrainConfig& cfg, const ModelConfig& model, int images);

/// CSV with header epoch,l_cls,l_box,l_mask,total.
void write_loss_curve(const std::vector<EpochLoss>& curve, const std::filesystem::path& path);

}  // namespace slapseg::det
