#include "slapseg/synthgen/splits.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"

namespace slapseg::synth {

using nlohmann::json;

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kValidation: return "validation";
    case Partition::kTest: return "test";
  }
  return "train";
}

Partition parse_partition(std::string_view s) {
  for (Partition p : {Partition::kTrain, Partition::kValidation, Partition::kTest}) {
    if (to_string(p) == s) return p;
  }
  throw ParseError("unknown partition '" + std::string(s) + "'");
}

std::vector<std::string> SplitAssignment::subjects(Partition p) const {
  std::vector<std::string> out;
  for (const auto& [id, part] : partition) {
    if (part == p) out.push_back(id);
  }
  return out;
}

std::vector<SplitAssignment> make_splits(const DatasetManifest& manifest, int folds, std::uint64_t seed) {
  if (folds < 3) throw ValidationError("need at least 3 folds");
  std::vector<SplitAssignment> out(folds);
  for (int k = 0; k < folds; ++k) out[k].fold = k;

  for (Cohort cohort : {Cohort::kAdult, Cohort::kJuvenile}) {
    std::vector<std::string> ids;
    for (const SubjectRecord& s : manifest.subjects) {
      if (s.cohort == cohort) ids.push_back(s.subject_id);
    }
    if (static_cast<int>(ids.size()) < folds) {
      throw ValidationError("cohort '" + std::string(to_string(cohort)) + "' has " + std::to_string(ids.size()) +
                            " subjects, need at least " + std::to_string(folds));
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, "splits/" + std::string(to_string(cohort))));
    rng.shuffle(ids.begin(), ids.end());

    const std::size_t n = ids.size();
    std::vector<int> group(n);
    for (int g = 0; g < folds; ++g) {
      for (std::size_t i = n * g / folds; i < n * (g + 1) / folds; ++i) group[i] = g;
    }
    for (int k = 0; k < folds; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        Partition p = Partition::kTrain;
        if (group[i] == k) {
          p = Partition::kTest;
        } else if (group[i] == (k + 1) % folds) {
          p = Partition::kValidation;
        }
        out[k].partition.emplace(ids[i], p);
      }
    }
  }
  return out;
}

std::string splits_to_json(const std::vector<SplitAssignment>& splits) {
  json folds = json::array();
  for (const SplitAssignment& s : splits) {
    json part = json::object();
    for (const auto& [id, p] : s.partition) part[id] = std::string(to_string(p));
    folds.push_back({{"fold", s.fold}, {"partition", std::move(part)}});
  }
  return json{{"folds", std::move(folds)}}.dump(1) + "\n";
}

std::vector<SplitAssignment> splits_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("splits file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("folds") || !doc["folds"].is_array()) {
    throw ParseError("splits field 'folds': expected an array");
  }
  std::vector<SplitAssignment> out;
  for (std::size_t i = 0; i < doc["folds"].size(); ++i) {
    const json& f = doc["folds"][i];
    const std::string path = "folds[" + std::to_string(i) + "]";
    if (!f.is_object() || !f.contains("fold") || !f["fold"].is_number_integer()) {
      throw ParseError("splits field '" + path + ".fold': expected an integer");
    }
    if (!f.contains("partition") || !f["partition"].is_object()) {
      throw ParseError("splits field '" + path + ".partition': expected an object");
    }
    SplitAssignment s;
    s.fold = f["fold"].get<int>();
    for (const auto& [id, p] : f["partition"].items()) {
      if (!p.is_string()) throw ParseError("splits field '" + path + ".partition." + id + "': expected a string");
      try {
        s.partition.emplace(id, parse_partition(p.get<std::string>()));
      } catch (const ParseError&) {
        throw ParseError("splits field '" + path + ".partition." + id + "': unknown partition");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SplitAssignment> read_splits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open splits file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return splits_from_json(buf.str());
}

void write_splits(const std::vector<SplitAssignment>& splits, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write splits file " + path.string());
  out << splits_to_json(splits);
}

std::vector<std::string> split_slaps(const DatasetManifest& manifest, const SplitAssignment& split, Partition p) {
  std::vector<std::string> out;
  for (const SubjectRecord& s : manifest.subjects) {
    auto it = split.partition.find(s.subject_id);
    if (it == split.partition.end()) throw ValidationError("subject '" + s.subject_id + "' missing from split");
    if (it->second == p) out.insert(out.end(), s.slap_ids.begin(), s.slap_ids.end());
  }
  return out;
}

}  // namespace slapseg::synth
