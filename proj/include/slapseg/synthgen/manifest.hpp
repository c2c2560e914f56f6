#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slapseg/imgcore/image.hpp"
#include "slapseg/synthgen/finger.hpp"
#include "slapseg/synthgen/slap.hpp"

namespace slapseg::synth {

inline constexpr int kManifestVersion = 1;

struct SubjectRecord {
  std::string subject_id;
  Cohort cohort = Cohort::kAdult;
  std::vector<std::string> slap_ids;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

struct SlapRecord {
  /// Image path relative to the manifest directory.
  std::string image;
  std::string sha256;
  double ppi = 500.0;
  Hand hand = Hand::kRight;
  GroundTruth truth;

  friend bool operator==(const SlapRecord&, const SlapRecord&) = default;
};

struct DatasetManifest {
  std::uint64_t generator_seed = 0;
  std::vector<SubjectRecord> subjects;
  std::map<std::string, SlapRecord> slaps;
  /// Directory image paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  /// Structural checks: unique subject ids, every slap owned by exactly one
  /// subject, ground truth consistency. With `check_files`, image files must
  /// exist. Throws ValidationError.
  void validate(bool check_files = true) const;

  std::filesystem::path image_path(const std::string& slap_id) const;
  img::GrayImage load_image(const std::string& slap_id) const;
  const SubjectRecord& subject_of(const std::string& slap_id) const;
  Cohort cohort_of(const std::string& slap_id) const { return subject_of(slap_id).cohort; }
  /// Slap ids belonging to the given subjects, in subject then slap order.
  std::vector<std::string> slaps_of(const std::vector<std::string>& subject_ids) const;

  bool operator==(const DatasetManifest& o) const {
    return generator_seed == o.generator_seed && subjects == o.subjects && slaps == o.slaps;
  }
};

/// Row-major run lengths, starting with a (possibly empty) run of zeros.
std::vector<int> encode_rle(const BinaryMask& mask);
std::vector<std::uint8_t> decode_rle(const std::vector<int>& runs, int width, int height);

std::string manifest_to_json(const DatasetManifest& m);
/// Parses without touching the filesystem. Throws ParseError naming the
/// offending field, ValidationError on structural problems.
DatasetManifest manifest_from_json(const std::string& text, const std::filesystem::path& base_dir);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace slapseg::synth
