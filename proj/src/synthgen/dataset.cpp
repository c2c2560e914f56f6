#include "slapseg/synthgen/dataset.hpp"

#include <algorithm>

#include "slapseg/common/digest.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"
#include "slapseg/imgcore/io.hpp"

namespace slapseg::synth {

namespace {

constexpr double kBlobExtent = 1.82;  // fingertip plus crease gap plus phalanx, in finger heights

std::string padded(int v, int digits) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < digits) s.insert(0, digits - s.size(), '0');
  return s;
}

}  // namespace

Hand hand_for_slap(int slap_index) {
  static constexpr Hand kCycle[] = {Hand::kRight, Hand::kLeft, Hand::kThumbs};
  return kCycle[slap_index % 3];
}

SlapSpec make_slap_spec(Cohort cohort, std::uint64_t subject_seed, int slap_index, std::uint64_t capture_seed,
                        const DatasetOptions& opts) {
  SlapSpec spec;
  spec.cohort = cohort;
  spec.hand = hand_for_slap(slap_index);
  std::tie(spec.canvas_width, spec.canvas_height) = default_canvas(cohort);
  const double scale = cohort == Cohort::kAdult ? 1.0 : 0.6;
  const double margin = 8.0 * scale;

  Rng subject(derive_seed(subject_seed, "subject-size"));
  const double body = subject.uniform(0.94, 1.06);

  Rng capture(derive_seed(capture_seed, "capture-layout"));
  spec.rotation = capture.uniform(-opts.max_rotation, opts.max_rotation);
  spec.noise_sigma = capture.uniform(opts.min_noise, opts.max_noise);

  const std::vector<FingerLabel> labels = layout_labels(spec.hand);
  const bool four = labels.size() == 4;
  std::vector<double> gaps;
  double total = 0.0;
  double lowest = 0.0;  // deepest footprint bottom relative to the base line
  std::vector<double> stagger;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const FingerDefaults d = finger_defaults(cohort, labels[i]);
    const std::string key = std::string(to_string(spec.hand)) + "/" + std::to_string(i);
    Rng finger(derive_seed(subject_seed, "finger-size/" + key));
    const double own = finger.uniform(0.97, 1.03);
    FingerSpec f;
    f.width = d.width * body * own;
    f.height = d.height * body * own;
    f.ridge_period = d.ridge_period;
    f.label = labels[i];
    f.orientation_seed = derive_seed(subject_seed, "finger-identity/" + key);
    f.joint_blob = capture.uniform() < opts.joint_blob_probability;
    // Outer fingers sit lower in a four-finger slap.
    const bool outer = four && (i == 0 || i == 3);
    stagger.push_back(((outer ? 8.0 : 0.0) + capture.uniform(-3.0, 3.0)) * scale);
    lowest = std::max(lowest, stagger.back() + f.height * (f.joint_blob ? kBlobExtent : 1.0));
    total += f.width;
    if (i > 0) {
      gaps.push_back(capture.uniform(10.0, 16.0) * scale);
      total += gaps.back();
    }
    spec.fingers.push_back(f);
  }

  const double x_slack = std::max(0.0, spec.canvas_width - 2 * margin - total);
  const double y_slack = std::max(0.0, spec.canvas_height - 2 * margin - lowest - 3.0 * scale);
  double x = margin + capture.uniform(0.0, x_slack);
  const double base = margin + 3.0 * scale + capture.uniform(0.0, y_slack);
  for (std::size_t i = 0; i < spec.fingers.size(); ++i) {
    FingerSpec& f = spec.fingers[i];
    if (i > 0) x += gaps[i - 1];
    f.center = {x + f.width / 2, base + stagger[i] + f.height / 2};
    x += f.width;
  }
  return spec;
}

DatasetManifest generate_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir) {
  if (opts.adult_subjects < 1 || opts.juvenile_subjects < 1 || opts.slaps_per_subject < 1) {
    throw ValidationError("subject and slap counts must be at least 1");
  }
  if (!(opts.joint_blob_probability >= 0.0 && opts.joint_blob_probability <= 1.0)) {
    throw ValidationError("joint_blob_probability must lie in [0, 1]");
  }
  if (!(opts.min_noise >= 0.0 && opts.max_noise >= opts.min_noise)) throw ValidationError("bad noise range");
  const std::filesystem::path image_dir = out_dir / "images";
  std::error_code ec;
  std::filesystem::create_directories(image_dir, ec);
  if (ec) throw IoError("cannot create " + image_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.generator_seed = opts.seed;
  manifest.base_dir = out_dir;
  const int digits = std::max(3, static_cast<int>(std::to_string(std::max(opts.adult_subjects, opts.juvenile_subjects)).size()));

  for (Cohort cohort : {Cohort::kAdult, Cohort::kJuvenile}) {
    const int n = cohort == Cohort::kAdult ? opts.adult_subjects : opts.juvenile_subjects;
    for (int s = 0; s < n; ++s) {
      SubjectRecord subject;
      subject.cohort = cohort;
      subject.subject_id = opts.id_prefix + (cohort == Cohort::kAdult ? "A" : "J") + padded(s, digits);
      const std::uint64_t subject_seed = derive_seed(opts.seed, "subject/" + subject.subject_id);
      for (int k = 0; k < opts.slaps_per_subject; ++k) {
        const std::string slap_id = subject.subject_id + "-" + padded(k, 2);
        const std::uint64_t capture_seed = derive_seed(subject_seed, static_cast<std::uint64_t>(k));
        const SlapSpec spec = make_slap_spec(cohort, subject_seed, k, capture_seed, opts);
        Slap slap = synth_slap(spec, derive_seed(capture_seed, "render"));

        SlapRecord rec;
        rec.image = "images/" + slap_id + ".png";
        rec.hand = spec.hand;
        rec.ppi = slap.image.ppi();
        const std::filesystem::path file = out_dir / rec.image;
        img::write_png(slap.image, file);
        rec.sha256 = sha256_file(file);
        rec.truth = std::move(slap.truth);
        manifest.slaps.emplace(slap_id, std::move(rec));
        subject.slap_ids.push_back(slap_id);
      }
      manifest.subjects.push_back(std::move(subject));
    }
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace slapseg::synth
