#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slapseg/detnet/anchors.hpp"
#include "slapseg/detnet/losses.hpp"
#include "slapseg/detnet/tensor.hpp"
#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"

namespace slapseg::det {

struct ModelConfig {
  AnchorConfig anchors;
  /// Backbone widths: stage 1 and 2 have one conv, stages 3 and 4 two.
  std::array<int, 4> channels{8, 16, 32, 64};
  int rpn_channels = 64;
  int head_hidden = 128;
  int box_pool = 7;
  /// Mask head pools mask_pool x mask_pool and upsamples once: m = 2 * mask_pool.
  int mask_pool = 14;
  int mask_channels = 16;
  int sampling_ratio = 2;
  /// Class-agnostic finger detector.
  int num_classes = 1;

  static constexpr int kBackboneStride = 16;
  int mask_size() const { return 2 * mask_pool; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter slots in a fixed order; names in param_names().
enum Param : int {
  kC1W, kC1B, kC2W, kC2B, kC3aW, kC3aB, kC3bW, kC3bB, kC4aW, kC4aB, kC4bW, kC4bB,
  kRpnW, kRpnB, kRpnClsW, kRpnClsB, kRpnBoxW, kRpnBoxB,
  kFc1W, kFc1B, kFc2W, kFc2B, kHeadClsW, kHeadClsB, kHeadBoxW, kHeadBoxB,
  kMask1W, kMask1B, kMask2W, kMask2B, kMaskOutW, kMaskOutB,
  kParamCount
};

const std::vector<std::string>& param_names();

struct ModelParams {
  ModelConfig config;
  std::vector<Tensor> tensors;

  Tensor& operator[](Param p) { return tensors[p]; }
  const Tensor& operator[](Param p) const { return tensors[p]; }
  std::size_t scalar_count() const;
  /// SHA-256 over config and all tensor bytes.
  std::string digest() const;
  /// Shapes match the config and all values are finite; throws ValidationError.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

std::vector<std::vector<int>> param_shapes(const ModelConfig& cfg);
/// He-normal convolution/FC weights, zero biases, small output layers.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
/// Zero tensors shaped like the parameters.
std::vector<Tensor> zeros_like(const ModelParams& p);

/// Input tensor (1, H, W) with ink mapped to positive values: (255 - v) / 255.
Tensor image_to_input(const img::GrayImage& image);

/// Continuous image coordinates -> backbone feature coordinates.
img::Box to_feature_coords(const img::Box& b);

/// Training targets for one image: sampled anchors and sampled ROIs.
struct AnchorSample {
  int anchor = 0;
  int label = 0;
  Deltas target{};  // normalized; meaningful for positives
};

struct RoiSample {
  img::Box roi;
  int label = 0;
  Deltas target{};  // normalized; meaningful for positives
  MaskTarget mask;  // positives only
};

struct SamplingPlan {
  std::vector<AnchorSample> anchors;
  std::vector<RoiSample> rois;
};

struct BoxHeadOut {
  std::vector<double> logits;
  std::vector<Deltas> deltas;  // normalized, relative to each ROI
};

/// One forward pass over an image. Keeps the activations needed for the
/// backward pass of loss().
class Forward {
 public:
  /// `input` is (1, H, W) with H, W multiples of the backbone stride.
  Forward(const ModelParams& params, Tensor input);

  int image_width() const { return input_.dim(2); }
  int image_height() const { return input_.dim(1); }
  const Tensor& features() const { return c4b_; }
  const std::vector<img::Box>& anchors() const { return anchors_; }
  /// One objectness logit and one normalized delta per anchor, anchor order.
  const std::vector<double>& objectness() const { return objectness_; }
  const std::vector<Deltas>& rpn_deltas() const { return rpn_deltas_; }

  BoxHeadOut box_head(std::span<const img::Box> rois) const;
  /// Mask logits (num_classes, m, m) per ROI.
  std::vector<std::vector<double>> mask_head(std::span<const img::Box> rois) const;

  /// Loss for a fixed plan. When `grads` is given (shaped like the params),
  /// parameter gradients are accumulated into it.
  LossBreakdown loss(const SamplingPlan& plan, double lambda, std::vector<Tensor>* grads) const;

 private:
  const ModelParams& p_;
  Tensor input_;
  Tensor c1_, c2_, c3a_, c3b_, c4a_, c4b_, rpn_;
  Tensor rpn_cls_, rpn_box_;
  std::vector<img::Box> anchors_;
  std::vector<double> objectness_;
  std::vector<Deltas> rpn_deltas_;
};

}  // namespace slapseg::det
