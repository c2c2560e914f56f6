#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "slapseg/synthgen/manifest.hpp"

namespace slapseg::synth {

enum class Partition { kTrain, kValidation, kTest };

std::string_view to_string(Partition p);
Partition parse_partition(std::string_view s);

struct SplitAssignment {
  int fold = 0;
  std::map<std::string, Partition> partition;

  std::vector<std::string> subjects(Partition p) const;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Identity-disjoint cross-validation folds. Within each cohort subjects are
/// sorted by id, shuffled with `seed` and cut into `folds` contiguous groups;
/// fold k tests group k, validates on group (k+1) mod folds and trains on
/// the rest. Throws ValidationError when a cohort has fewer than `folds`
/// subjects.
std::vector<SplitAssignment> make_splits(const DatasetManifest& manifest, int folds, std::uint64_t seed);

std::string splits_to_json(const std::vector<SplitAssignment>& splits);
std::vector<SplitAssignment> splits_from_json(const std::string& text);
std::vector<SplitAssignment> read_splits(const std::filesystem::path& path);
void write_splits(const std::vector<SplitAssignment>& splits, const std::filesystem::path& path);

/// Slap ids of the given partition of one fold.
std::vector<std::string> split_slaps(const DatasetManifest& manifest, const SplitAssignment& split, Partition p);

}  // namespace slapseg::synth
