#include "cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <numbers>

#include "CLI11.hpp"
#include "json.hpp"
#include "slapseg/annosvc/server.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/detnet/checkpoint.hpp"
#include "slapseg/detnet/train.hpp"
#include "slapseg/evalkit/compare.hpp"
#include "slapseg/synthgen/dataset.hpp"
#include "slapseg/synthgen/splits.hpp"

namespace slapseg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Options {
  std::string out;

  // gen
  int adults = 0;
  int juveniles = 0;
  int per_subject = 0;
  std::uint64_t seed = 0;
  double blob_probability = 0.3;
  double max_rotation = 12.0;
  std::string id_prefix;

  // inputs shared by the analysis commands
  std::string manifest;
  std::string splits;
  int folds = 10;
  int fold = -1;
  std::string partition = "test";
  std::string cohort;
  std::vector<std::string> slaps;
  std::vector<std::string> models;
  std::string model;
  double score_threshold = 0.5;
  int impostors = eval::kImpostorsPerPrint;
  double histogram_bin = 8.0;

  // train
  int epochs = 12;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  int rois = 64;
  double lambda = 1.0;
  double angle_jitter = 2.0;
  std::string name = "model";

  // serve / export
  std::string store;
  std::string proposals = "baseline";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

/// Everything a subcommand needs after parsing.
struct Context {
  Options& o;
  CLI::App* sub;
  std::ostream& out;
  fs::path out_dir;
};

fs::path resolve_out(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("SLAPSEG_DATA_DIR"); env && *env) return env;
  throw ValidationError("no output directory: pass -o or set SLAPSEG_DATA_DIR");
}

fs::path manifest_path(const Context& c) {
  return c.o.manifest.empty() ? c.out_dir / "manifest.json" : fs::path(c.o.manifest);
}
fs::path splits_path(const Context& c) { return c.o.splits.empty() ? c.out_dir / "splits.json" : fs::path(c.o.splits); }

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
}

synth::DatasetManifest load_manifest(const Context& c) {
  const fs::path p = manifest_path(c);
  require_file(p, "manifest");
  return synth::read_manifest(p);
}

/// --slap ids, else the fold partition, else everything; then the cohort
/// filter.
std::vector<std::string> select_slaps(const Context& c, const synth::DatasetManifest& m) {
  std::vector<std::string> ids;
  if (!c.o.slaps.empty()) {
    for (const std::string& id : c.o.slaps) {
      if (!m.slaps.contains(id)) throw ValidationError("unknown slap '" + id + "'");
      ids.push_back(id);
    }
  } else if (c.o.fold >= 0) {
    const fs::path sp = splits_path(c);
    require_file(sp, "splits");
    const auto splits = synth::read_splits(sp);
    if (c.o.fold >= static_cast<int>(splits.size())) {
      throw ValidationError("fold " + std::to_string(c.o.fold) + " out of range (" + std::to_string(splits.size()) +
                            " folds)");
    }
    ids = synth::split_slaps(m, splits[c.o.fold], synth::parse_partition(c.o.partition));
  } else {
    for (const auto& [id, rec] : m.slaps) ids.push_back(id);
  }
  if (!c.o.cohort.empty()) {
    const synth::Cohort want = synth::parse_cohort(c.o.cohort);
    std::erase_if(ids, [&](const std::string& id) { return m.cohort_of(id) != want; });
  }
  if (ids.empty()) throw ValidationError("no slaps selected");
  return ids;
}

det::InferConfig infer_config(const Options& o) {
  det::InferConfig cfg;
  cfg.score_threshold = o.score_threshold;
  return cfg;
}

eval::Segmenter segmenter_for(const std::string& spec, const Options& o) {
  if (spec == "baseline") return eval::baseline_segmenter();
  if (spec == "ground-truth") return eval::ground_truth_segmenter();
  require_file(spec, "checkpoint");
  auto params = std::make_shared<det::ModelParams>(det::load_model(spec));
  return eval::detnet_segmenter(fs::path(spec).stem().string(), params, infer_config(o));
}

void write_json(const fs::path& p, const ordered_json& j) {
  std::ofstream f(p, std::ios::binary);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("cannot write " + p.string());
}

/// Provenance: the parsed options of the subcommand, in declaration order.
void echo_config(const Context& c) {
  ordered_json opts;
  for (const CLI::Option* opt : c.sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    const std::vector<std::string> r = opt->results();
    const std::string key = opt->get_name();
    if (r.empty() && opt->get_items_expected_max() > 1) {
      opts[key] = ordered_json::array();
    } else if (r.empty()) {
      const std::string d = opt->get_default_str();
      opts[key] = d.empty() ? ordered_json(nullptr) : ordered_json(d);
    } else if (opt->get_items_expected_max() > 1) {
      opts[key] = r;
    } else {
      opts[key] = r.front();
    }
  }
  write_json(c.out_dir / (c.sub->get_name() + "_config.json"), {{"subcommand", c.sub->get_name()}, {"options", opts}});
}

ordered_json box_json(const img::Box& b) { return ordered_json::array({b.left, b.top, b.right, b.bottom}); }

int cmd_gen(Context& c) {
  synth::DatasetOptions d;
  d.adult_subjects = c.o.adults;
  d.juvenile_subjects = c.o.juveniles;
  d.slaps_per_subject = c.o.per_subject;
  d.seed = c.o.seed;
  d.joint_blob_probability = c.o.blob_probability;
  d.max_rotation = c.o.max_rotation;
  d.id_prefix = c.o.id_prefix;
  const synth::DatasetManifest m = synth::generate_dataset(d, c.out_dir);
  c.out << "wrote " << m.slaps.size() << " slaps of " << m.subjects.size() << " subjects to "
        << (c.out_dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_split(Context& c) {
  const synth::DatasetManifest m = load_manifest(c);
  const auto splits = synth::make_splits(m, c.o.folds, c.o.seed);
  synth::write_splits(splits, c.out_dir / "splits.json");
  c.out << "wrote " << splits.size() << " folds to " << (c.out_dir / "splits.json").string() << "\n";
  return kExitOk;
}

int cmd_train(Context& c) {
  const synth::DatasetManifest m = load_manifest(c);
  det::TrainConfig t;
  t.epochs = c.o.epochs;
  t.rng_seed = c.o.seed;
  t.sgd.learning_rate = c.o.lr;
  t.sgd.momentum = c.o.momentum;
  t.sgd.weight_decay = c.o.weight_decay;
  t.rois_per_image = c.o.rois;
  t.lambda = c.o.lambda;
  t.angle_jitter = c.o.angle_jitter;
  t.last_good_path = c.out_dir / (c.o.name + "_last_good.ckpt");
  t.validate();
  if (c.o.fold >= 0) c.o.partition = "train";
  const std::vector<std::string> ids = select_slaps(c, m);
  const det::TrainResult r = det::train(m, ids, t, {}, [&](const det::EpochLoss& e) {
    c.out << "epoch " << e.epoch << " total " << e.mean.total << "\n";
  });
  const fs::path ckpt = c.out_dir / (c.o.name + ".ckpt");
  det::save_model(r.params, ckpt);
  det::write_loss_curve(r.curve, c.out_dir / (c.o.name + "_loss.csv"));
  c.out << "wrote " << ckpt.string() << " digest " << r.params.digest() << "\n";
  return kExitOk;
}

int run_segmenter(Context& c, const eval::Segmenter& seg, const fs::path& dest) {
  const synth::DatasetManifest m = load_manifest(c);
  ordered_json slaps = ordered_json::array();
  for (const std::string& id : select_slaps(c, m)) {
    const img::GrayImage image = m.load_image(id);
    const eval::Segmentation s = seg.run(image, m.slaps.at(id));
    ordered_json boxes = ordered_json::array();
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      boxes.push_back({{"frame_box", box_json(s.boxes[i])},
                       {"image_box", box_json(img::transform_box(s.boxes[i], s.frame_to_image))},
                       {"score", s.scores[i]}});
    }
    const img::Point origin = s.frame_to_image.apply({0, 0});
    const img::Point ex = s.frame_to_image.apply({1, 0});
    slaps.push_back({{"slap_id", id},
                     {"frame_angle", std::atan2(-(ex.y - origin.y), ex.x - origin.x) * 180.0 / std::numbers::pi},
                     {"boxes", boxes}});
  }
  write_json(dest, {{"model", seg.name}, {"slaps", slaps}});
  c.out << "wrote " << dest.string() << "\n";
  return kExitOk;
}

int cmd_segment(Context& c) {
  const eval::Segmenter seg = segmenter_for(c.o.model, c.o);
  return run_segmenter(c, seg, c.out_dir / ("segment_" + eval::file_safe(seg.name) + ".json"));
}

int cmd_baseline(Context& c) { return run_segmenter(c, eval::baseline_segmenter(), c.out_dir / "baseline.json"); }

int run_compare(Context& c, bool matching, const std::string& subdir) {
  const synth::DatasetManifest m = load_manifest(c);
  const std::vector<std::string> ids = select_slaps(c, m);
  std::vector<eval::Segmenter> segs;
  for (const std::string& spec : c.o.models) segs.push_back(segmenter_for(spec, c.o));
  eval::CompareConfig cfg;
  cfg.seed = c.o.seed;
  cfg.matching = matching;
  cfg.impostors_per_print = c.o.impostors;
  cfg.histogram_bin = c.o.histogram_bin;
  const eval::CompareReport r = eval::compare_models(m, ids, segs, cfg);
  eval::write_report(r, c.out_dir / subdir);
  c.out << eval::mae_table_csv(r);
  if (matching) c.out << eval::tpr_table_csv(r);
  c.out << "wrote " << (c.out_dir / subdir).string() << "\n";
  return kExitOk;
}

int cmd_serve(Context& c) {
  const fs::path store_dir = c.o.store.empty() ? c.out_dir / "annotations" : fs::path(c.o.store);
  std::unique_ptr<anno::AnnotationStore> store;
  if (fs::exists(store_dir / "events.jsonl")) {
    store = anno::AnnotationStore::open(store_dir);
  } else {
    const fs::path mp = manifest_path(c);
    require_file(mp, "manifest");
    store = anno::AnnotationStore::create(store_dir, mp, anno::make_proposer(c.o.proposals));
  }
  anno::ServerConfig cfg;
  cfg.host = c.o.host;
  cfg.port = c.o.port;
  cfg.export_dir = c.out_dir / "export";
  cfg.static_dir = c.o.static_dir;
  anno::AnnotationServer server(*store, cfg);
  const int port = server.bind();
  static anno::AnnotationServer* running = nullptr;
  running = &server;
  std::signal(SIGINT, [](int) { running->stop(); });
  std::signal(SIGTERM, [](int) { running->stop(); });
  c.out << "serving " << store_dir.string() << " on http://" << cfg.host << ":" << port << std::endl;
  server.serve();
  running = nullptr;
  return kExitOk;
}

int cmd_export(Context& c) {
  const fs::path store_dir = c.o.store.empty() ? c.out_dir / "annotations" : fs::path(c.o.store);
  const auto store = anno::AnnotationStore::open(store_dir);
  const anno::ExportResult r = store->export_annotations(c.out_dir / "export");
  if (r.warning) c.out << "warning: " << *r.warning << "\n";
  c.out << "wrote " << r.manifest.slaps.size() << " slaps to " << r.manifest_path.string() << "\n";
  return kExitOk;
}

using Handler = int (*)(Context&);

struct Built {
  std::unique_ptr<CLI::App> app;
  std::vector<std::pair<CLI::App*, Handler>> subs;
};

void add_out(CLI::App* s, Options& o) {
  s->add_option("-o,--out", o.out, "Output directory (default: $SLAPSEG_DATA_DIR)");
}

void add_inputs(CLI::App* s, Options& o) {
  s->add_option("--manifest", o.manifest, "Dataset manifest (default: <out>/manifest.json)");
  s->add_option("--splits", o.splits, "Split file (default: <out>/splits.json)");
  s->add_option("--fold", o.fold, "Use this fold of the split file")->check(CLI::NonNegativeNumber);
  s->add_option("--partition", o.partition, "Partition of the fold: train, validation or test")
      ->check(CLI::IsMember({"train", "validation", "test"}));
  s->add_option("--cohort", o.cohort, "Only slaps of this cohort: adult or juvenile")
      ->check(CLI::IsMember({"adult", "juvenile"}));
  s->add_option("--slap", o.slaps, "Explicit slap id; repeatable");
}

void add_eval(CLI::App* s, Options& o) {
  add_inputs(s, o);
  s->add_option("--models", o.models, "Comma-separated: baseline, ground-truth or checkpoint paths")
      ->delimiter(',')
      ->required();
  s->add_option("--score-threshold", o.score_threshold, "Detection score threshold for checkpoints");
  s->add_option("--histogram-bin", o.histogram_bin, "Bottom-error histogram bin width in pixels")
      ->check(CLI::PositiveNumber);
}

Built build(Options& o) {
  Built b;
  b.app = std::make_unique<CLI::App>("Slap fingerprint segmentation pipeline", "slapseg");
  b.app->require_subcommand(1);
  b.app->option_defaults()->always_capture_default();
  CLI::App& app = *b.app;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic slap corpus");
  gen->add_option("--adults", o.adults, "Adult subjects")->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--juveniles", o.juveniles, "Juvenile subjects")->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--per-subject", o.per_subject, "Slaps per subject (right, left, thumbs, ...)")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "Generator seed")->required();
  gen->add_option("--blob-prob", o.blob_probability, "Chance a finger shows its lower phalanx")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--max-rotation", o.max_rotation, "Largest slap rotation in degrees")->check(CLI::Range(0.0, 45.0));
  gen->add_option("--id-prefix", o.id_prefix, "Prefix for subject ids");
  add_out(gen, o);
  b.subs.emplace_back(gen, cmd_gen);

  CLI::App* split = app.add_subcommand("split", "Write identity-disjoint cross-validation folds");
  split->add_option("--manifest", o.manifest, "Dataset manifest (default: <out>/manifest.json)");
  split->add_option("--folds", o.folds, "Number of folds")->check(CLI::Range(3, 1000));
  split->add_option("--seed", o.seed, "Shuffle seed");
  add_out(split, o);
  b.subs.emplace_back(split, cmd_split);

  CLI::App* train = app.add_subcommand("train", "Train the detector");
  add_inputs(train, o);
  train->add_option("--seed", o.seed, "Training seed")->required();
  train->add_option("--epochs", o.epochs, "Epochs")->check(CLI::PositiveNumber);
  train->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--momentum", o.momentum, "SGD momentum")->check(CLI::Range(0.0, 1.0));
  train->add_option("--weight-decay", o.weight_decay, "Weight decay")->check(CLI::NonNegativeNumber);
  train->add_option("--rois", o.rois, "ROIs sampled per image")->check(CLI::PositiveNumber);
  train->add_option("--lambda", o.lambda, "Weight of the box regression terms")->check(CLI::NonNegativeNumber);
  train->add_option("--angle-jitter", o.angle_jitter, "Training jitter of the upright angle in degrees")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--name", o.name, "Checkpoint name under the output directory");
  add_out(train, o);
  b.subs.emplace_back(train, cmd_train);

  CLI::App* segment = app.add_subcommand("segment", "Segment slaps with a trained checkpoint");
  add_inputs(segment, o);
  segment->add_option("--model", o.model, "Checkpoint path")->required();
  segment->add_option("--score-threshold", o.score_threshold, "Detection score threshold");
  add_out(segment, o);
  b.subs.emplace_back(segment, cmd_segment);

  CLI::App* baseline = app.add_subcommand("baseline", "Segment slaps with the classical baseline");
  add_inputs(baseline, o);
  add_out(baseline, o);
  b.subs.emplace_back(baseline, cmd_baseline);

  CLI::App* mae = app.add_subcommand("eval-mae", "Per-side error statistics against ground truth");
  add_eval(mae, o);
  add_out(mae, o);
  b.subs.emplace_back(mae, [](Context& c) { return run_compare(c, false, "eval-mae"); });

  CLI::App* match = app.add_subcommand("eval-match", "Genuine/impostor matching of segmented prints");
  add_eval(match, o);
  match->add_option("--seed", o.seed, "Impostor sampling seed")->required();
  match->add_option("--impostors", o.impostors, "Impostor comparisons per probe")->check(CLI::PositiveNumber);
  add_out(match, o);
  b.subs.emplace_back(match, [](Context& c) { return run_compare(c, true, "eval-match"); });

  CLI::App* compare = app.add_subcommand("compare", "Error statistics and matching for several models");
  add_eval(compare, o);
  compare->add_option("--seed", o.seed, "Impostor sampling seed");
  compare->add_option("--impostors", o.impostors, "Impostor comparisons per probe")->check(CLI::PositiveNumber);
  add_out(compare, o);
  b.subs.emplace_back(compare, [](Context& c) { return run_compare(c, true, "compare"); });

  CLI::App* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--manifest", o.manifest, "Manifest to ingest into a new store (default: <out>/manifest.json)");
  serve->add_option("--store", o.store, "Store directory (default: <out>/annotations)");
  serve->add_option("--proposals", o.proposals, "Proposal source: baseline or model:<checkpoint>");
  serve->add_option("--host", o.host, "Listen address");
  serve->add_option("--port", o.port, "Listen port; 0 picks a free one")->check(CLI::Range(0, 65535));
  serve->add_option("--static", o.static_dir, "Directory served at /ui");
  add_out(serve, o);
  b.subs.emplace_back(serve, cmd_serve);

  CLI::App* exp = app.add_subcommand("export", "Export finished annotations as a dataset");
  exp->add_option("--store", o.store, "Store directory (default: <out>/annotations)");
  add_out(exp, o);
  b.subs.emplace_back(exp, cmd_export);
  return b;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  Built b = build(o);
  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    b.app->parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = b.app->exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (auto& [sub, handler] : b.subs) {
    if (!sub->parsed()) continue;
    try {
      Context c{o, sub, out, resolve_out(o)};
      fs::create_directories(c.out_dir);
      echo_config(c);
      return handler(c);
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const NotFoundError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

HelpAudit audit_help() {
  Options o;
  Built b = build(o);
  HelpAudit a;
  for (auto& [sub, handler] : b.subs) {
    for (const CLI::Option* opt : sub->get_options()) {
      const std::string entry = sub->get_name() + " " + opt->get_name();
      a.options.push_back(entry);
      if (opt->get_description().empty()) a.undocumented.push_back(entry);
    }
  }
  return a;
}

}  // namespace slapseg::cli
