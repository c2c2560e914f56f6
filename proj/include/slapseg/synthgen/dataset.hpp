#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "slapseg/synthgen/manifest.hpp"
#include "slapseg/synthgen/slap.hpp"

namespace slapseg::synth {

struct DatasetOptions {
  int adult_subjects = 1;
  int juvenile_subjects = 1;
  int slaps_per_subject = 1;
  std::uint64_t seed = 0;
  /// Prepended to subject ids so independently generated corpora never share
  /// identities.
  std::string id_prefix;
  double max_rotation = 12.0;
  double min_noise = 4.0;
  double max_noise = 12.0;
  /// Chance that a finger is rendered with its medial phalanx.
  double joint_blob_probability = 0.3;
};

/// Deterministic spec for slap `slap_index` of a subject. Finger identity
/// (ridge pattern, size) depends only on the subject seed, hand and label;
/// placement, rotation, noise and joint blobs vary per capture.
SlapSpec make_slap_spec(Cohort cohort, std::uint64_t subject_seed, int slap_index, std::uint64_t capture_seed,
                        const DatasetOptions& opts);

/// Hand captured by slap `slap_index`: right, left, thumbs, repeating.
Hand hand_for_slap(int slap_index);

/// Writes images under `out_dir/images` and `out_dir/manifest.json`.
DatasetManifest generate_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir);

}  // namespace slapseg::synth
