#include "slapseg/synthgen/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/imgcore/io.hpp"

namespace slapseg::synth {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "slapseg-manifest";

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  throw ParseError("manifest field '" + path + "': " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) bad_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad_field(path + "." + key, "missing");
  return *it;
}

double get_number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number()) bad_field(path + "." + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number_integer()) bad_field(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_string()) bad_field(path + "." + key, "expected a string");
  return v.get<std::string>();
}

template <typename F>
auto parse_enum(F f, const std::string& value, const std::string& path) {
  try {
    return f(value);
  } catch (const ParseError&) {
    bad_field(path, "unknown value '" + value + "'");
  }
}

json box_to_json(const img::Box& b) { return json::array({b.left, b.top, b.right, b.bottom}); }

img::Box box_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) bad_field(path, "expected [left, top, right, bottom]");
  for (const json& v : j) {
    if (!v.is_number()) bad_field(path, "expected numeric box edges");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json mask_to_json(const BinaryMask& m) {
  return {{"x0", m.x0}, {"y0", m.y0}, {"width", m.width}, {"height", m.height}, {"rle", encode_rle(m)}};
}

BinaryMask mask_from_json(const json& j, const std::string& path) {
  BinaryMask m;
  m.x0 = get_int(j, "x0", path);
  m.y0 = get_int(j, "y0", path);
  m.width = get_int(j, "width", path);
  m.height = get_int(j, "height", path);
  if (m.width <= 0 || m.height <= 0) bad_field(path, "mask size must be positive");
  const json& rle = field(j, "rle", path);
  if (!rle.is_array()) bad_field(path + ".rle", "expected an array");
  std::vector<int> runs;
  for (const json& v : rle) {
    if (!v.is_number_integer() || v.get<long long>() < 0) bad_field(path + ".rle", "expected non-negative integers");
    runs.push_back(v.get<int>());
  }
  try {
    m.bits = decode_rle(runs, m.width, m.height);
  } catch (const ParseError& e) {
    bad_field(path + ".rle", e.what());
  }
  return m;
}

json truth_to_json(const GroundTruth& t) {
  json fingers = json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    json f = {{"label", std::string(to_string(t.labels[i]))},
              {"box", box_to_json(t.boxes[i])},
              {"joint_blob", static_cast<bool>(t.joint_blobs[i])}};
    if (!t.masks.empty()) f["mask"] = mask_to_json(t.masks[i]);
    fingers.push_back(std::move(f));
  }
  return {{"rotation", t.rotation},
          {"upright_width", t.upright_width},
          {"upright_height", t.upright_height},
          {"fingers", std::move(fingers)}};
}

GroundTruth truth_from_json(const json& j, const std::string& path) {
  GroundTruth t;
  t.rotation = get_number(j, "rotation", path);
  t.upright_width = get_int(j, "upright_width", path);
  t.upright_height = get_int(j, "upright_height", path);
  const json& fingers = field(j, "fingers", path);
  if (!fingers.is_array()) bad_field(path + ".fingers", "expected an array");
  std::size_t with_mask = 0;
  for (std::size_t i = 0; i < fingers.size(); ++i) {
    const std::string fp = path + ".fingers[" + std::to_string(i) + "]";
    const json& f = fingers[i];
    t.labels.push_back(parse_enum(parse_finger_label, get_string(f, "label", fp), fp + ".label"));
    t.boxes.push_back(box_from_json(field(f, "box", fp), fp + ".box"));
    bool blob = false;
    if (f.contains("joint_blob")) {
      if (!f["joint_blob"].is_boolean()) bad_field(fp + ".joint_blob", "expected a boolean");
      blob = f["joint_blob"].get<bool>();
    }
    t.joint_blobs.push_back(blob);
    if (f.contains("mask")) {
      t.masks.push_back(mask_from_json(f["mask"], fp + ".mask"));
      ++with_mask;
    }
  }
  if (with_mask != 0 && with_mask != fingers.size()) {
    throw ValidationError("'" + path + "': masks must be given for all fingers or none");
  }
  return t;
}

}  // namespace

std::vector<int> encode_rle(const BinaryMask& mask) {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int run = 0;
  for (std::uint8_t b : mask.bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v != current) {
      runs.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

std::vector<std::uint8_t> decode_rle(const std::vector<int>& runs, int width, int height) {
  const std::size_t total = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  std::uint8_t v = 0;
  for (int r : runs) {
    if (r < 0 || bits.size() + r > total) throw ParseError("run lengths exceed the mask size");
    bits.insert(bits.end(), static_cast<std::size_t>(r), v);
    v ^= 1;
  }
  if (bits.size() != total) throw ParseError("run lengths do not cover the mask");
  return bits;
}

void DatasetManifest::validate(bool check_files) const {
  std::set<std::string> ids;
  std::map<std::string, std::string> owner;
  for (const SubjectRecord& s : subjects) {
    if (s.subject_id.empty()) throw ValidationError("empty subject_id");
    if (!ids.insert(s.subject_id).second) throw ValidationError("subject '" + s.subject_id + "' listed twice");
    for (const std::string& slap : s.slap_ids) {
      auto [it, fresh] = owner.emplace(slap, s.subject_id);
      if (!fresh) {
        throw ValidationError("slap '" + slap + "' referenced by subject '" + it->second + "' and '" + s.subject_id +
                              "'");
      }
      if (!slaps.contains(slap)) throw ValidationError("subject '" + s.subject_id + "' lists unknown slap '" + slap + "'");
    }
  }
  for (const auto& [id, rec] : slaps) {
    if (!owner.contains(id)) throw ValidationError("slap '" + id + "' belongs to no subject");
    if (rec.image.empty()) throw ValidationError("slap '" + id + "' has no image path");
    if (!(rec.ppi > 0.0)) throw ValidationError("slap '" + id + "' has non-positive ppi");
    try {
      rec.truth.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("slap '" + id + "': " + e.what());
    }
    if (check_files && !std::filesystem::is_regular_file(image_path(id))) {
      throw ValidationError("slap '" + id + "' image not found: " + image_path(id).string());
    }
  }
}

std::filesystem::path DatasetManifest::image_path(const std::string& slap_id) const {
  auto it = slaps.find(slap_id);
  if (it == slaps.end()) throw NotFoundError("unknown slap '" + slap_id + "'");
  return base_dir / it->second.image;
}

img::GrayImage DatasetManifest::load_image(const std::string& slap_id) const {
  img::GrayImage image = img::read_image(image_path(slap_id));
  image.set_ppi(slaps.at(slap_id).ppi);
  return image;
}

const SubjectRecord& DatasetManifest::subject_of(const std::string& slap_id) const {
  for (const SubjectRecord& s : subjects) {
    for (const std::string& id : s.slap_ids) {
      if (id == slap_id) return s;
    }
  }
  throw NotFoundError("slap '" + slap_id + "' belongs to no subject");
}

std::vector<std::string> DatasetManifest::slaps_of(const std::vector<std::string>& subject_ids) const {
  std::vector<std::string> out;
  for (const std::string& sid : subject_ids) {
    bool found = false;
    for (const SubjectRecord& s : subjects) {
      if (s.subject_id != sid) continue;
      out.insert(out.end(), s.slap_ids.begin(), s.slap_ids.end());
      found = true;
    }
    if (!found) throw NotFoundError("unknown subject '" + sid + "'");
  }
  return out;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json subjects = json::array();
  for (const SubjectRecord& s : m.subjects) {
    subjects.push_back(
        {{"subject_id", s.subject_id}, {"cohort", std::string(to_string(s.cohort))}, {"slap_ids", s.slap_ids}});
  }
  json slaps = json::object();
  for (const auto& [id, r] : m.slaps) {
    slaps[id] = {{"image", r.image},
                 {"sha256", r.sha256},
                 {"ppi", r.ppi},
                 {"hand", std::string(to_string(r.hand))},
                 {"truth", truth_to_json(r.truth)}};
  }
  const json doc = {{"format", kFormat},
                    {"version", kManifestVersion},
                    {"generator_seed", m.generator_seed},
                    {"subjects", std::move(subjects)},
                    {"slaps", std::move(slaps)}};
  return doc.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (get_string(doc, "format", "manifest") != kFormat) bad_field("manifest.format", "unrecognized format");
  if (get_int(doc, "version", "manifest") != kManifestVersion) {
    throw VersionError("unsupported manifest version " + doc["version"].dump());
  }

  DatasetManifest m;
  m.base_dir = base_dir;
  const json& seed = field(doc, "generator_seed", "manifest");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
    bad_field("manifest.generator_seed", "expected a non-negative integer");
  }
  m.generator_seed = seed.get<std::uint64_t>();

  const json& subjects = field(doc, "subjects", "manifest");
  if (!subjects.is_array()) bad_field("manifest.subjects", "expected an array");
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::string path = "subjects[" + std::to_string(i) + "]";
    SubjectRecord s;
    s.subject_id = get_string(subjects[i], "subject_id", path);
    s.cohort = parse_enum(parse_cohort, get_string(subjects[i], "cohort", path), path + ".cohort");
    const json& ids = field(subjects[i], "slap_ids", path);
    if (!ids.is_array()) bad_field(path + ".slap_ids", "expected an array");
    for (const json& id : ids) {
      if (!id.is_string()) bad_field(path + ".slap_ids", "expected strings");
      s.slap_ids.push_back(id.get<std::string>());
    }
    m.subjects.push_back(std::move(s));
  }

  const json& slaps = field(doc, "slaps", "manifest");
  if (!slaps.is_object()) bad_field("manifest.slaps", "expected an object");
  for (const auto& [id, j] : slaps.items()) {
    const std::string path = "slaps." + id;
    if (!j.is_object()) bad_field(path, "expected an object");
    SlapRecord r;
    if (!j.contains("image") || (j["image"].is_string() && j["image"].get<std::string>().empty())) {
      throw ValidationError("slap '" + id + "' has no image path");
    }
    r.image = get_string(j, "image", path);
    if (j.contains("sha256")) r.sha256 = get_string(j, "sha256", path);
    if (j.contains("ppi")) r.ppi = get_number(j, "ppi", path);
    r.hand = parse_enum(parse_hand, get_string(j, "hand", path), path + ".hand");
    r.truth = truth_from_json(field(j, "truth", path), path + ".truth");
    m.slaps.emplace(id, std::move(r));
  }
  m.validate(false);
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  DatasetManifest m = manifest_from_json(buf.str(), path.parent_path());
  m.validate(true);
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate(false);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << manifest_to_json(m);
    if (!out) throw IoError("failed writing manifest " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace slapseg::synth
