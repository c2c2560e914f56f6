#include "slapseg/evalkit/compare.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"

namespace slapseg::eval {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string errors_csv(const CellReport& c) {
  std::string out = "finger,left,top,right,bottom\n";
  for (std::size_t i = 0; i < c.errors.size(); ++i) {
    const SideError& e = c.errors[i];
    out += c.finger_ids[i] + "," + fmt(e.left, "%.4f") + "," + fmt(e.top, "%.4f") + "," + fmt(e.right, "%.4f") +
           "," + fmt(e.bottom, "%.4f") + "\n";
  }
  return out;
}

}  // namespace

const CellReport& CompareReport::cell(const std::string& model, synth::Cohort cohort) const {
  for (const CellReport& c : cells) {
    if (c.model == model && c.cohort == cohort) return c;
  }
  throw NotFoundError("no report cell for " + model + "/" + std::string(synth::to_string(cohort)));
}

CompareReport compare_models(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                             std::span<const Segmenter> segmenters, const CompareConfig& cfg) {
  std::vector<img::GrayImage> images;
  images.reserve(slap_ids.size());
  for (const std::string& id : slap_ids) images.push_back(manifest.load_image(id));

  CompareReport report;
  for (const Segmenter& seg : segmenters) {
    for (synth::Cohort cohort : {synth::Cohort::kAdult, synth::Cohort::kJuvenile}) {
      CellReport cell;
      cell.model = seg.name;
      cell.cohort = cohort;
      std::vector<PrintSample> prints;
      for (std::size_t s = 0; s < slap_ids.size(); ++s) {
        const std::string& id = slap_ids[s];
        if (manifest.cohort_of(id) != cohort) continue;
        const synth::SlapRecord& rec = manifest.slaps.at(id);
        const img::GrayImage& image = images[s];
        ++cell.slaps;
        cell.fingers += rec.truth.size();
        Segmentation out;
        try {
          out = seg.run(image, rec);
        } catch (const Error& e) {
          cell.failures.push_back({id, std::string("segmenter error: ") + e.what()});
          cell.unmatched_truth += rec.truth.size();
          continue;
        }
        if (out.boxes.size() != rec.truth.size()) {
          cell.failures.push_back({id, "found " + std::to_string(out.boxes.size()) + " boxes, expected " +
                                           std::to_string(rec.truth.size())});
        }
        const img::RigidTransform to_truth = out.frame_to_image.then(truth_to_image(rec.truth, image).inverse());
        std::vector<img::Box> mapped;
        for (const img::Box& b : out.boxes) mapped.push_back(img::transform_box(b, to_truth));
        const BoxMatch m = greedy_match(mapped, rec.truth.boxes);
        cell.unmatched_truth += m.unmatched_truth.size();
        cell.unmatched_detected += m.unmatched_detected.size();
        const std::string subject = manifest.subject_of(id).subject_id;
        for (const BoxMatch::Pair& p : m.pairs) {
          const std::string fid = id + "#" + std::to_string(p.truth);
          cell.errors.push_back(side_errors(mapped[p.detected], rec.truth.boxes[p.truth]));
          cell.finger_ids.push_back(fid);
          if (cfg.matching) {
            prints.push_back({fid, subject + "/" + std::string(synth::to_string(rec.hand)) + "/" +
                                       std::to_string(p.truth),
                              crop_print(image, out.frame_to_image, out.boxes[p.detected])});
          }
        }
      }
      if (!cell.errors.empty()) cell.mae = mae(cell.errors);
      cell.tolerance = summarize_tolerance(cell.errors);
      cell.bottom_histogram = error_histogram(cell.errors, Side::kBottom, cfg.histogram_bin);
      if (cfg.matching) {
        try {
          cell.trials = match_protocol(prints, ncc_scorer, cfg.impostors_per_print,
                                       derive_seed(cfg.seed, "match/" + std::string(synth::to_string(cohort))));
          cell.roc = roc(cell.trials);
        } catch (const ValidationError& e) {
          cell.failures.push_back({"", std::string("matching skipped: ") + e.what()});
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

CompareReport compare_models(const synth::DatasetManifest& manifest, const synth::SplitAssignment& split,
                             std::span<const Segmenter> segmenters, const CompareConfig& cfg) {
  return compare_models(manifest, synth::split_slaps(manifest, split, synth::Partition::kTest), segmenters, cfg);
}

std::string file_safe(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out.empty() ? "_" : out;
}

std::string mae_table_csv(const CompareReport& report) {
  std::string out = "model,cohort,side,mean_abs,std_abs,count\n";
  for (const CellReport& c : report.cells) {
    for (Side s : kSides) {
      out += c.model + "," + std::string(synth::to_string(c.cohort)) + "," + std::string(to_string(s)) + ",";
      if (c.mae) {
        out += fmt((*c.mae)[s].mean, "%.4f") + "," + fmt((*c.mae)[s].std, "%.4f") + "," +
               std::to_string(c.mae->count) + "\n";
      } else {
        out += ",,0\n";
      }
    }
  }
  return out;
}

std::string tpr_table_csv(const CompareReport& report) {
  std::string out = "model,cohort,genuine,impostor,tpr_at_0.001,tpr_at_0.01,tpr_at_0.1\n";
  for (const CellReport& c : report.cells) {
    out += c.model + "," + std::string(synth::to_string(c.cohort)) + ",";
    if (c.roc) {
      out += std::to_string(c.roc->genuine) + "," + std::to_string(c.roc->impostor);
      for (double q : kReportFprs) out += "," + fmt(c.roc->tpr_at.at(q));
      out += "\n";
    } else {
      out += "0,0,,,\n";
    }
  }
  return out;
}

std::string report_json(const CompareReport& report) {
  ordered_json cells = ordered_json::array();
  for (const CellReport& c : report.cells) {
    ordered_json j;
    j["model"] = c.model;
    j["cohort"] = synth::to_string(c.cohort);
    j["slaps"] = c.slaps;
    j["fingers"] = c.fingers;
    j["matched"] = c.errors.size();
    j["unmatched_truth"] = c.unmatched_truth;
    j["unmatched_detected"] = c.unmatched_detected;
    if (c.mae) {
      for (Side s : kSides) {
        j["mae"][std::string(to_string(s))] = {{"mean", (*c.mae)[s].mean}, {"std", (*c.mae)[s].std}};
      }
    }
    for (Side s : kSides) j["tolerance"][std::string(to_string(s))] = c.tolerance.flagged[static_cast<int>(s)];
    j["tolerance"]["any"] = c.tolerance.any;
    if (c.roc) {
      j["genuine"] = c.roc->genuine;
      j["impostor"] = c.roc->impostor;
      for (const auto& [q, t] : c.roc->tpr_at) j["tpr_at"][fmt(q, "%g")] = t;
    }
    ordered_json fails = ordered_json::array();
    for (const SlapFailure& f : c.failures) fails.push_back({{"slap_id", f.slap_id}, {"reason", f.reason}});
    j["failures"] = fails;
    cells.push_back(j);
  }
  return ordered_json{{"cells", cells}}.dump(1) + "\n";
}

void write_report(const CompareReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const CellReport& c : report.cells) {
    const std::string stem = file_safe(c.model) + "_" + std::string(synth::to_string(c.cohort)) + "_";
    if (c.mae) write_text(dir / (stem + "mae.csv"), mae_csv(*c.mae));
    write_text(dir / (stem + "bottom_hist.csv"), histogram_csv(c.bottom_histogram));
    write_text(dir / (stem + "errors.csv"), errors_csv(c));
    if (c.roc) write_text(dir / (stem + "roc.csv"), roc_csv(*c.roc));
  }
  write_text(dir / "mae_table.csv", mae_table_csv(report));
  write_text(dir / "tpr_table.csv", tpr_table_csv(report));
  write_text(dir / "report.json", report_json(report));
}

}  // namespace slapseg::eval
