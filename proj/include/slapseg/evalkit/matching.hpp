#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/imgcore/image.hpp"

namespace slapseg::eval {

/// One-to-one assignment of detections to truth boxes.
struct BoxMatch {
  struct Pair {
    std::size_t detected = 0;
    std::size_t truth = 0;
    double iou = 0.0;
  };
  std::vector<Pair> pairs;  // ordered by truth index
  std::vector<std::size_t> unmatched_detected;
  std::vector<std::size_t> unmatched_truth;
};

/// Greedy: repeatedly pair the remaining detection and truth with the
/// highest IoU, as long as it is above `min_iou`. Ties go to lower indices.
BoxMatch greedy_match(std::span<const img::Box> detected, std::span<const img::Box> truth, double min_iou = 0.0);

inline constexpr int kCropSize = 128;

/// Samples `box` (given in some frame) from `image` onto a size x size grid;
/// `frame_to_image` maps the frame into image pixels.
img::GrayImage crop_print(const img::GrayImage& image, const img::RigidTransform& frame_to_image,
                          const img::Box& box, int size = kCropSize);

struct NccResult {
  double score = 0.0;
  /// One of the crops has zero variance; the score is 0 then.
  bool degenerate = false;
};

/// Zero-mean normalized cross-correlation at zero lag. Throws
/// ValidationError when the crops differ in size.
NccResult ncc_score(const img::GrayImage& a, const img::GrayImage& b);

/// A segmented fingerprint with its identity.
struct PrintSample {
  std::string id;
  /// Same finger of the same subject iff the keys are equal.
  std::string finger_key;
  img::GrayImage crop{1, 1};
};

enum class TrialKind { kGenuine, kImpostor };

struct MatchTrial {
  std::string probe;
  std::string gallery;
  double score = 0.0;
  TrialKind kind = TrialKind::kGenuine;

  friend bool operator==(const MatchTrial&, const MatchTrial&) = default;
};

using Scorer = std::function<double(const img::GrayImage&, const img::GrayImage&)>;
double ncc_scorer(const img::GrayImage& a, const img::GrayImage& b);

/// Every mated pair once as a genuine trial; for every print as probe,
/// `impostors_per_print` non-mated gallery prints drawn without replacement
/// (with replacement when fewer non-mated prints exist). Throws
/// ValidationError without any mated pair or without two distinct fingers.
std::vector<MatchTrial> match_protocol(std::span<const PrintSample> prints, const Scorer& scorer,
                                       int impostors_per_print, std::uint64_t seed);

inline constexpr int kImpostorsPerPrint = 20;

}  // namespace slapseg::eval
