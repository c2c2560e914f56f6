#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "slapseg/detnet/infer.hpp"
#include "slapseg/detnet/model.hpp"
#include "slapseg/imgcore/geometry.hpp"
#include "slapseg/synthgen/manifest.hpp"

namespace slapseg::anno {

enum class Stage { kRotationReview, kBoxReview, kDone };
enum class BoxSource { kBaseline, kModel, kHuman };

std::string_view to_string(Stage s);
std::string_view to_string(BoxSource s);
Stage parse_stage(std::string_view s);

struct ProposedBox {
  img::Box box;
  synth::FingerLabel label = synth::FingerLabel::kIndex;
  BoxSource source = BoxSource::kBaseline;

  friend bool operator==(const ProposedBox&, const ProposedBox&) = default;
};

/// Boxes live in the upright frame of the current angle: a canvas the size
/// of the image, rotated by `angle()` about its center onto the image.
struct AnnotationTask {
  std::string slap_id;
  std::string subject_id;
  synth::Cohort cohort = synth::Cohort::kAdult;
  synth::Hand hand = synth::Hand::kRight;
  int image_width = 0;
  int image_height = 0;
  Stage stage = Stage::kRotationReview;
  /// 0 after ingest, +1 per accepted write.
  int version = 0;
  double proposed_angle = 0.0;
  std::optional<double> verified_angle;
  std::vector<ProposedBox> boxes;
  std::string last_annotator;

  double angle() const { return verified_angle.value_or(proposed_angle); }
  img::RigidTransform upright_to_image() const;
  friend bool operator==(const AnnotationTask&, const AnnotationTask&) = default;
};

struct BoxEdit {
  std::size_t index = 0;
  img::Box box;
  /// Label edits are accepted and recorded; absent keeps the old label.
  std::optional<synth::FingerLabel> label;
};

struct Correction {
  int base_version = 0;
  std::vector<BoxEdit> edits;
  std::string annotator;
  std::string timestamp;
  /// Closes the task; untouched proposals count as confirmed by the annotator.
  bool finalize = true;
};

/// Initial proposal for a freshly ingested slap, in the upright frame of
/// `angle`, left to right.
struct Proposal {
  double angle = 0.0;
  std::vector<ProposedBox> boxes;
};

using Proposer = std::function<Proposal(const img::GrayImage& image, synth::Hand hand)>;
Proposer baseline_proposer();
Proposer model_proposer(std::shared_ptr<const det::ModelParams> params, const det::InferConfig& cfg = {});
/// "baseline" or "model:<checkpoint path>".
Proposer make_proposer(const std::string& spec);

struct TaskFilter {
  std::optional<Stage> stage;
  std::optional<synth::Cohort> cohort;
  /// Tasks come in slap_id order; a page starts strictly after `cursor`.
  std::string cursor;
  std::size_t limit = 100;
};

struct TaskPage {
  std::vector<AnnotationTask> tasks;
  /// Slap id to pass as the next cursor; empty on the last page.
  std::string next_cursor;
};

struct ExportResult {
  synth::DatasetManifest manifest;
  std::filesystem::path manifest_path;
  /// Set when no slap has been finished yet; the manifest is empty then.
  std::optional<std::string> warning;
};

/// Persistent annotation state. Every accepted write is one line appended to
/// events.jsonl and then applied in memory through the same code path that
/// replays the log; snapshot.json caches the state every `snapshot_every`
/// events. Writers are serialized; readers see a consistent state.
class AnnotationStore {
 public:
  static constexpr int kDefaultSnapshotEvery = 64;

  /// Ingests every slap of the manifest at `manifest_path` into a new store
  /// directory. Throws ValidationError if `dir` already holds a log.
  static std::unique_ptr<AnnotationStore> create(const std::filesystem::path& dir,
                                                 const std::filesystem::path& manifest_path, const Proposer& proposer,
                                                 int snapshot_every = kDefaultSnapshotEvery);
  /// Reopens a store: snapshot plus the events after it, or the whole log
  /// when `use_snapshot` is false. Throws CorruptFileError on a bad log.
  static std::unique_ptr<AnnotationStore> open(const std::filesystem::path& dir, bool use_snapshot = true,
                                               int snapshot_every = kDefaultSnapshotEvery);

  TaskPage list_tasks(const TaskFilter& filter) const;
  /// Throws NotFoundError for unknown ids.
  AnnotationTask get_task(const std::string& slap_id) const;
  std::vector<AnnotationTask> all_tasks() const;
  std::filesystem::path image_path(const std::string& slap_id) const;

  /// Throws ConflictError outside the rotation stage, ValidationError on a
  /// non-finite angle. Returns the new version.
  int submit_rotation(const std::string& slap_id, double verified_angle, const std::string& annotator,
                      const std::string& timestamp = {});
  /// Throws ConflictError on a stale base_version or outside the box stage,
  /// ValidationError on bad indices or boxes. The store is unchanged then.
  int submit_boxes(const std::string& slap_id, const Correction& correction);

  /// Writes manifest.json plus copies of the finished slaps' images under
  /// `out_dir`. Ground truth is the human-confirmed boxes.
  ExportResult export_annotations(const std::filesystem::path& out_dir) const;

  std::size_t event_count() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  AnnotationStore(std::filesystem::path dir, synth::DatasetManifest source, int snapshot_every);
  void commit(const std::string& event_line);
  void apply(const std::string& event_line);
  void write_snapshot() const;

  std::filesystem::path dir_;
  synth::DatasetManifest source_;
  int snapshot_every_;
  std::map<std::string, AnnotationTask> tasks_;
  std::size_t events_ = 0;
  std::ofstream log_;
  mutable std::shared_mutex mutex_;
};

}  // namespace slapseg::anno
