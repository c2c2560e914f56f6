#include "slapseg/annosvc/store.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "slapseg/baseline/baseline.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/detnet/checkpoint.hpp"
#include "slapseg/synthgen/slap.hpp"

namespace slapseg::anno {

namespace {

using nlohmann::json;

constexpr const char* kLogName = "events.jsonl";
constexpr const char* kSnapshotName = "snapshot.json";

json box_json(const img::Box& b) { return json::array({b.left, b.top, b.right, b.bottom}); }

img::Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("box must be [left, top, right, bottom]");
  for (const json& v : j) {
    if (!v.is_number()) throw ParseError("box coordinates must be numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

BoxSource parse_source(std::string_view s) {
  if (s == "baseline") return BoxSource::kBaseline;
  if (s == "model") return BoxSource::kModel;
  if (s == "human") return BoxSource::kHuman;
  throw ParseError("unknown box source '" + std::string(s) + "'");
}

json task_json(const AnnotationTask& t) {
  json boxes = json::array();
  for (const ProposedBox& b : t.boxes) {
    boxes.push_back({{"box", box_json(b.box)}, {"label", synth::to_string(b.label)}, {"source", to_string(b.source)}});
  }
  json j{{"slap_id", t.slap_id},
         {"subject_id", t.subject_id},
         {"cohort", synth::to_string(t.cohort)},
         {"hand", synth::to_string(t.hand)},
         {"image_width", t.image_width},
         {"image_height", t.image_height},
         {"stage", to_string(t.stage)},
         {"version", t.version},
         {"proposed_angle", t.proposed_angle},
         {"verified_angle", nullptr},
         {"boxes", boxes},
         {"last_annotator", t.last_annotator}};
  if (t.verified_angle) j["verified_angle"] = *t.verified_angle;
  return j;
}

AnnotationTask task_from(const json& j) {
  AnnotationTask t;
  t.slap_id = j.at("slap_id").get<std::string>();
  t.subject_id = j.at("subject_id").get<std::string>();
  t.cohort = synth::parse_cohort(j.at("cohort").get<std::string>());
  t.hand = synth::parse_hand(j.at("hand").get<std::string>());
  t.image_width = j.at("image_width").get<int>();
  t.image_height = j.at("image_height").get<int>();
  t.stage = parse_stage(j.at("stage").get<std::string>());
  t.version = j.at("version").get<int>();
  t.proposed_angle = j.at("proposed_angle").get<double>();
  if (!j.at("verified_angle").is_null()) t.verified_angle = j.at("verified_angle").get<double>();
  for (const json& b : j.at("boxes")) {
    t.boxes.push_back({box_from(b.at("box")), synth::parse_finger_label(b.at("label").get<std::string>()),
                       parse_source(b.at("source").get<std::string>())});
  }
  t.last_annotator = j.at("last_annotator").get<std::string>();
  return t;
}

/// Labels by position for the hand's layout; extra boxes repeat the last.
std::vector<ProposedBox> labelled(const std::vector<img::Box>& boxes, synth::Hand hand, BoxSource source) {
  const std::vector<synth::FingerLabel> layout = synth::layout_labels(hand);
  std::vector<ProposedBox> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.push_back({boxes[i], layout[std::min(i, layout.size() - 1)], source});
  }
  return out;
}

img::RigidTransform image_to_frame(int w, int h, double angle) { return img::centered_rotation(w, h, -angle, w, h); }

void write_file_atomically(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kRotationReview: return "rotation_review";
    case Stage::kBoxReview: return "box_review";
    case Stage::kDone: return "done";
  }
  return "?";
}

std::string_view to_string(BoxSource s) {
  switch (s) {
    case BoxSource::kBaseline: return "baseline";
    case BoxSource::kModel: return "model";
    case BoxSource::kHuman: return "human";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  if (s == "rotation_review") return Stage::kRotationReview;
  if (s == "box_review") return Stage::kBoxReview;
  if (s == "done") return Stage::kDone;
  throw ParseError("unknown stage '" + std::string(s) + "'");
}

img::RigidTransform AnnotationTask::upright_to_image() const {
  return img::centered_rotation(image_width, image_height, angle(), image_width, image_height);
}

Proposer baseline_proposer() {
  return [](const img::GrayImage& image, synth::Hand hand) {
    const base::BaselineResult r = base::baseline_segment(image);
    return Proposal{r.angle, labelled(r.boxes, hand, BoxSource::kBaseline)};
  };
}

Proposer model_proposer(std::shared_ptr<const det::ModelParams> params, const det::InferConfig& cfg) {
  if (!params) throw ValidationError("model_proposer needs parameters");
  return [params, cfg](const img::GrayImage& image, synth::Hand hand) {
    const base::Binary fg = base::binarize(image);
    const double angle = fg.count() > 0 ? base::estimate_rotation(fg).angle : 0.0;
    const det::InferResult r = det::infer(*params, image, angle, cfg);
    const std::size_t keep = std::min(r.detections.size(), synth::layout_labels(hand).size());
    const img::RigidTransform view_to_frame =
        r.image_to_view.inverse().then(image_to_frame(image.width(), image.height(), angle));
    std::vector<img::Box> boxes;
    for (std::size_t i = 0; i < keep; ++i) boxes.push_back(img::transform_box(r.detections[i].upright_box, view_to_frame));
    std::sort(boxes.begin(), boxes.end(), [](const img::Box& a, const img::Box& b) { return a.left < b.left; });
    return Proposal{angle, labelled(boxes, hand, BoxSource::kModel)};
  };
}

Proposer make_proposer(const std::string& spec) {
  if (spec == "baseline") return baseline_proposer();
  if (spec.rfind("model:", 0) == 0 && spec.size() > 6) {
    return model_proposer(std::make_shared<det::ModelParams>(det::load_model(spec.substr(6))));
  }
  throw ValidationError("proposal source must be 'baseline' or 'model:<path>', got '" + spec + "'");
}

AnnotationStore::AnnotationStore(std::filesystem::path dir, synth::DatasetManifest source, int snapshot_every)
    : dir_(std::move(dir)), source_(std::move(source)), snapshot_every_(snapshot_every) {
  if (snapshot_every_ <= 0) throw ValidationError("snapshot interval must be positive");
}

std::unique_ptr<AnnotationStore> AnnotationStore::create(const std::filesystem::path& dir,
                                                         const std::filesystem::path& manifest_path,
                                                         const Proposer& proposer, int snapshot_every) {
  if (std::filesystem::exists(dir / kLogName)) throw ValidationError(dir.string() + " already holds a store");
  const std::filesystem::path abs = std::filesystem::absolute(manifest_path);
  synth::DatasetManifest m = synth::read_manifest(abs);
  std::filesystem::create_directories(dir);
  std::unique_ptr<AnnotationStore> s(new AnnotationStore(dir, std::move(m), snapshot_every));
  s->log_.open(dir / kLogName, std::ios::binary | std::ios::app);
  if (!s->log_) throw IoError("cannot open " + (dir / kLogName).string());
  s->commit(json{{"type", "source"}, {"manifest", abs.string()}}.dump());
  for (const auto& [id, rec] : s->source_.slaps) {
    const img::GrayImage image = s->source_.load_image(id);
    const Proposal p = proposer(image, rec.hand);
    AnnotationTask t;
    t.slap_id = id;
    t.subject_id = s->source_.subject_of(id).subject_id;
    t.cohort = s->source_.cohort_of(id);
    t.hand = rec.hand;
    t.image_width = image.width();
    t.image_height = image.height();
    t.proposed_angle = p.angle;
    t.boxes = p.boxes;
    s->commit(json{{"type", "ingest"}, {"task", task_json(t)}}.dump());
  }
  return s;
}

std::unique_ptr<AnnotationStore> AnnotationStore::open(const std::filesystem::path& dir, bool use_snapshot,
                                                       int snapshot_every) {
  std::ifstream in(dir / kLogName, std::ios::binary);
  if (!in) throw NotFoundError("no annotation log in " + dir.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw CorruptFileError("annotation log is empty");
  std::string manifest;
  try {
    const json head = json::parse(lines.front());
    if (head.at("type") != "source") throw CorruptFileError("annotation log does not start with its source");
    manifest = head.at("manifest").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("annotation log header: ") + e.what());
  }
  std::unique_ptr<AnnotationStore> s(new AnnotationStore(dir, synth::read_manifest(manifest), snapshot_every));
  std::size_t start = 0;
  if (use_snapshot && std::filesystem::exists(dir / kSnapshotName)) {
    try {
      std::ifstream sin(dir / kSnapshotName, std::ios::binary);
      const json snap = json::parse(sin);
      const std::size_t n = snap.at("events").get<std::size_t>();
      if (n <= lines.size()) {
        for (const json& t : snap.at("tasks")) s->tasks_[t.at("slap_id").get<std::string>()] = task_from(t);
        start = n;
      }
    } catch (const json::exception& e) {
      throw CorruptFileError(std::string("snapshot: ") + e.what());
    }
  }
  s->events_ = start;
  for (std::size_t i = start; i < lines.size(); ++i) {
    try {
      s->apply(lines[i]);
    } catch (const json::exception& e) {
      throw CorruptFileError("annotation log line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  s->log_.open(dir / kLogName, std::ios::binary | std::ios::app);
  if (!s->log_) throw IoError("cannot open " + (dir / kLogName).string());
  return s;
}

void AnnotationStore::commit(const std::string& event_line) {
  log_ << event_line << '\n';
  log_.flush();
  if (!log_) throw IoError("cannot append to the annotation log");
  apply(event_line);
  if (events_ % static_cast<std::size_t>(snapshot_every_) == 0) write_snapshot();
}

void AnnotationStore::apply(const std::string& event_line) {
  const json e = json::parse(event_line);
  const std::string type = e.at("type").get<std::string>();
  ++events_;
  if (type == "source") return;
  if (type == "ingest") {
    AnnotationTask t = task_from(e.at("task"));
    tasks_[t.slap_id] = std::move(t);
    return;
  }
  AnnotationTask& t = tasks_.at(e.at("slap_id").get<std::string>());
  t.last_annotator = e.at("annotator").get<std::string>();
  ++t.version;
  if (type == "rotation") {
    const double angle = e.at("angle").get<double>();
    const double delta = t.proposed_angle - angle;
    if (delta != 0.0) {
      // Old upright frame -> image -> new upright frame is a rotation about
      // the shared canvas center.
      const img::Point c{t.image_width * 0.5, t.image_height * 0.5};
      for (ProposedBox& b : t.boxes) b.box = img::rotate_box(b.box, delta, c);
    }
    t.verified_angle = angle;
    t.stage = Stage::kBoxReview;
  } else if (type == "boxes") {
    for (const json& ed : e.at("edits")) {
      ProposedBox& b = t.boxes.at(ed.at("index").get<std::size_t>());
      b.box = box_from(ed.at("box"));
      if (ed.contains("label")) b.label = synth::parse_finger_label(ed.at("label").get<std::string>());
      b.source = BoxSource::kHuman;
    }
    if (e.at("finalize").get<bool>()) t.stage = Stage::kDone;
  } else {
    throw CorruptFileError("unknown event type '" + type + "'");
  }
}

void AnnotationStore::write_snapshot() const {
  json tasks = json::array();
  for (const auto& [id, t] : tasks_) tasks.push_back(task_json(t));
  write_file_atomically(dir_ / kSnapshotName, json{{"events", events_}, {"tasks", tasks}}.dump());
}

TaskPage AnnotationStore::list_tasks(const TaskFilter& f) const {
  if (f.limit == 0) throw ValidationError("page limit must be positive");
  std::shared_lock lock(mutex_);
  TaskPage page;
  for (auto it = f.cursor.empty() ? tasks_.begin() : tasks_.upper_bound(f.cursor); it != tasks_.end(); ++it) {
    const AnnotationTask& t = it->second;
    if (f.stage && t.stage != *f.stage) continue;
    if (f.cohort && t.cohort != *f.cohort) continue;
    if (page.tasks.size() == f.limit) {
      page.next_cursor = page.tasks.back().slap_id;
      break;
    }
    page.tasks.push_back(t);
  }
  return page;
}

AnnotationTask AnnotationStore::get_task(const std::string& slap_id) const {
  std::shared_lock lock(mutex_);
  const auto it = tasks_.find(slap_id);
  if (it == tasks_.end()) throw NotFoundError("unknown slap '" + slap_id + "'");
  return it->second;
}

std::vector<AnnotationTask> AnnotationStore::all_tasks() const {
  std::shared_lock lock(mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& [id, t] : tasks_) out.push_back(t);
  return out;
}

std::filesystem::path AnnotationStore::image_path(const std::string& slap_id) const {
  if (!source_.slaps.contains(slap_id)) throw NotFoundError("unknown slap '" + slap_id + "'");
  return source_.image_path(slap_id);
}

std::size_t AnnotationStore::event_count() const {
  std::shared_lock lock(mutex_);
  return events_;
}

int AnnotationStore::submit_rotation(const std::string& slap_id, double verified_angle, const std::string& annotator,
                                     const std::string& timestamp) {
  if (!std::isfinite(verified_angle)) throw ValidationError("verified angle must be finite");
  std::unique_lock lock(mutex_);
  const auto it = tasks_.find(slap_id);
  if (it == tasks_.end()) throw NotFoundError("unknown slap '" + slap_id + "'");
  if (it->second.stage != Stage::kRotationReview) {
    throw ConflictError("slap '" + slap_id + "' is in stage " + std::string(to_string(it->second.stage)));
  }
  commit(json{{"type", "rotation"},
              {"slap_id", slap_id},
              {"angle", verified_angle},
              {"annotator", annotator},
              {"timestamp", timestamp}}
             .dump());
  return it->second.version;
}

int AnnotationStore::submit_boxes(const std::string& slap_id, const Correction& c) {
  std::unique_lock lock(mutex_);
  const auto it = tasks_.find(slap_id);
  if (it == tasks_.end()) throw NotFoundError("unknown slap '" + slap_id + "'");
  const AnnotationTask& t = it->second;
  if (t.stage != Stage::kBoxReview) {
    throw ConflictError("slap '" + slap_id + "' is in stage " + std::string(to_string(t.stage)));
  }
  if (c.base_version != t.version) {
    throw ConflictError("slap '" + slap_id + "' is at version " + std::to_string(t.version) + ", edit is based on " +
                        std::to_string(c.base_version));
  }
  json edits = json::array();
  std::vector<bool> seen(t.boxes.size(), false);
  for (const BoxEdit& ed : c.edits) {
    if (ed.index >= t.boxes.size()) throw ValidationError("edit index " + std::to_string(ed.index) + " out of range");
    if (seen[ed.index]) throw ValidationError("box " + std::to_string(ed.index) + " edited twice");
    seen[ed.index] = true;
    if (!ed.box.valid()) throw ValidationError("edited box " + std::to_string(ed.index) + " is invalid");
    json j{{"index", ed.index}, {"box", box_json(ed.box)}};
    if (ed.label) j["label"] = synth::to_string(*ed.label);
    edits.push_back(j);
  }
  commit(json{{"type", "boxes"},
              {"slap_id", slap_id},
              {"base_version", c.base_version},
              {"edits", edits},
              {"annotator", c.annotator},
              {"timestamp", c.timestamp},
              {"finalize", c.finalize}}
             .dump());
  return it->second.version;
}

ExportResult AnnotationStore::export_annotations(const std::filesystem::path& out_dir) const {
  std::shared_lock lock(mutex_);
  ExportResult r;
  r.manifest.generator_seed = source_.generator_seed;
  r.manifest.base_dir = out_dir;
  std::filesystem::create_directories(out_dir / "images");
  for (const synth::SubjectRecord& subj : source_.subjects) {
    synth::SubjectRecord out{subj.subject_id, subj.cohort, {}};
    for (const std::string& id : subj.slap_ids) {
      const auto it = tasks_.find(id);
      if (it == tasks_.end() || it->second.stage != Stage::kDone) continue;
      const AnnotationTask& t = it->second;
      const synth::SlapRecord& src = source_.slaps.at(id);
      synth::SlapRecord rec;
      rec.ppi = src.ppi;
      rec.hand = src.hand;
      rec.sha256 = src.sha256;
      rec.image = "images/" + source_.image_path(id).filename().string();
      std::filesystem::copy_file(source_.image_path(id), out_dir / rec.image,
                                 std::filesystem::copy_options::overwrite_existing);
      rec.truth.rotation = t.angle();
      rec.truth.upright_width = t.image_width;
      rec.truth.upright_height = t.image_height;
      for (const ProposedBox& b : t.boxes) {
        rec.truth.boxes.push_back(b.box);
        rec.truth.labels.push_back(b.label);
        // The annotation workflow does not record lower phalanges.
        rec.truth.joint_blobs.push_back(false);
      }
      r.manifest.slaps[id] = std::move(rec);
      out.slap_ids.push_back(id);
    }
    if (!out.slap_ids.empty()) r.manifest.subjects.push_back(std::move(out));
  }
  if (r.manifest.slaps.empty()) r.warning = "no finished slaps to export";
  r.manifest_path = out_dir / "manifest.json";
  synth::write_manifest(r.manifest, r.manifest_path);
  return r;
}

}  // namespace slapseg::anno
