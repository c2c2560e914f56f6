#include "slapseg/detnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "slapseg/common/error.hpp"
#include "slapseg/detnet/checkpoint.hpp"
#include "slapseg/detnet/infer.hpp"

namespace slapseg::det {

namespace {

constexpr double kRoiPositiveIou = 0.5;
constexpr double kRpnTrainNms = 0.7;

img::Box transformed_mask_hull(const synth::BinaryMask& m, const img::RigidTransform& t) {
  double l = 1e300, top = 1e300, r = -1e300, b = -1e300;
  const auto add = [&](double x, double y) {
    const img::Point p = t.apply({x, y});
    l = std::min(l, p.x);
    top = std::min(top, p.y);
    r = std::max(r, p.x);
    b = std::max(b, p.y);
  };
  for (int y = 0; y < m.height; ++y) {
    int first = -1;
    int last = -1;
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      if (first < 0) first = x;
      last = x;
    }
    if (first < 0) continue;
    const double y0 = m.y0 + y;
    add(m.x0 + first, y0);
    add(m.x0 + first, y0 + 1);
    add(m.x0 + last + 1, y0);
    add(m.x0 + last + 1, y0 + 1);
  }
  if (l > r) throw ValidationError("ground-truth mask is empty");
  return {l, top, r, b};
}

struct LoadedSlap {
  img::GrayImage image;
  const synth::GroundTruth* truth;
};

std::vector<LoadedSlap> load_slaps(const synth::DatasetManifest& manifest, const std::vector<std::string>& ids) {
  std::vector<LoadedSlap> out;
  for (const std::string& id : ids) {
    const synth::SlapRecord& rec = manifest.slaps.at(id);
    if (rec.truth.size() == 0) continue;
    out.push_back({manifest.load_image(id), &rec.truth});
  }
  if (out.empty()) throw ValidationError("training partition has no annotated slaps");
  return out;
}

void add_into(LossBreakdown& acc, const LossBreakdown& l) {
  acc.l_cls += l.l_cls;
  acc.l_box += l.l_box;
  acc.l_mask += l.l_mask;
  acc.total += l.total;
}

LossBreakdown scaled(LossBreakdown l, double s) {
  l.l_cls *= s;
  l.l_box *= s;
  l.l_mask *= s;
  l.total *= s;
  return l;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(sgd.learning_rate > 0) || !(sgd.momentum >= 0 && sgd.momentum < 1) || !(sgd.weight_decay >= 0)) {
    throw ValidationError("invalid SGD settings");
  }
  if (rois_per_image < 1 || rpn_batch < 2 || epochs < 1 || train_proposals < 1 || train_pre_nms < 1) {
    throw ValidationError("sampling sizes and epochs must be positive");
  }
  if (!(positive_fraction > 0 && positive_fraction <= 1) || !(rpn_positive_fraction > 0 && rpn_positive_fraction <= 1)) {
    throw ValidationError("positive fractions must lie in (0, 1]");
  }
  if (!(lambda > 0) || !(angle_jitter >= 0)) throw ValidationError("lambda must be positive, jitter non-negative");
}

TrainSample make_train_sample(const img::GrayImage& image, const synth::GroundTruth& truth, double angle_offset) {
  const UprightView view = make_upright_view(image, truth.rotation + angle_offset);
  const img::RigidTransform truth_to_view =
      truth.upright_to_image(image.width(), image.height()).then(view.image_to_view);
  TrainSample s;
  s.input = image_to_input(view.image);
  s.view_to_truth = truth_to_view.inverse();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    GtInstance g;
    g.truth_box = truth.boxes[i];
    if (!truth.masks.empty()) {
      g.mask = &truth.masks[i];
      g.box = transformed_mask_hull(truth.masks[i], truth_to_view);
    } else {
      g.box = img::transform_box(truth.boxes[i], truth_to_view);
    }
    g.box = img::clip_box(g.box, view.image.width(), view.image.height());
    s.gt.push_back(g);
  }
  return s;
}

std::vector<RoiDraw> sample_rois(std::span<const img::Box> proposals, std::span<const img::Box> gt, int n,
                                 double positive_fraction, Rng& rng) {
  std::vector<RoiDraw> pos;
  std::vector<RoiDraw> neg;
  for (const img::Box& p : proposals) {
    RoiDraw d{p, -1, 0.0};
    int best = -1;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double v = iou(p, gt[g]);
      if (v > d.iou) {
        d.iou = v;
        best = static_cast<int>(g);
      }
    }
    if (d.iou >= kRoiPositiveIou) {
      d.gt = best;
      pos.push_back(d);
    } else {
      neg.push_back(d);
    }
  }
  rng.shuffle(pos.begin(), pos.end());
  rng.shuffle(neg.begin(), neg.end());
  const std::size_t max_pos = static_cast<std::size_t>(std::floor(n * positive_fraction));
  const std::size_t n_pos = std::min(pos.size(), max_pos);
  const std::size_t n_neg = std::min(neg.size(), static_cast<std::size_t>(n) - n_pos);
  std::vector<RoiDraw> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
  out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
  return out;
}

MaskTarget mask_target(const GtInstance& gt, const img::Box& roi, const img::RigidTransform& view_to_truth, int m) {
  MaskTarget t;
  t.m = m;
  t.k = 0;
  t.y.assign(static_cast<std::size_t>(m) * m, 0);
  const double bw = roi.width() / m;
  const double bh = roi.height() / m;
  const img::Point c = gt.truth_box.center();
  const double ax = gt.truth_box.width() / 2;
  const double ay = gt.truth_box.height() / 2;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const img::Point q = view_to_truth.apply({roi.left + (j + 0.5) * bw, roi.top + (i + 0.5) * bh});
      bool inside;
      if (gt.mask) {
        const int mx = static_cast<int>(std::floor(q.x)) - gt.mask->x0;
        const int my = static_cast<int>(std::floor(q.y)) - gt.mask->y0;
        inside = mx >= 0 && my >= 0 && mx < gt.mask->width && my < gt.mask->height && gt.mask->at(mx, my);
      } else {
        const double dx = (q.x - c.x) / ax;
        const double dy = (q.y - c.y) / ay;
        inside = dx * dx + dy * dy <= 1.0;
      }
      t.y[static_cast<std::size_t>(i) * m + j] = inside ? 1 : 0;
    }
  }
  return t;
}

SamplingPlan make_plan(const Forward& fw, const TrainSample& sample, const TrainConfig& cfg, int mask_size, Rng& rng) {
  std::vector<img::Box> gt;
  for (const GtInstance& g : sample.gt) gt.push_back(g.box);
  const auto& anchors = fw.anchors();
  const AnchorMatch match = label_anchors(anchors, gt);

  std::vector<int> pos;
  std::vector<int> neg;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (match.labels[a] == AnchorLabel::kPositive) pos.push_back(static_cast<int>(a));
    if (match.labels[a] == AnchorLabel::kNegative) neg.push_back(static_cast<int>(a));
  }
  rng.shuffle(pos.begin(), pos.end());
  rng.shuffle(neg.begin(), neg.end());
  const std::size_t n_pos =
      std::min(pos.size(), static_cast<std::size_t>(std::floor(cfg.rpn_batch * cfg.rpn_positive_fraction)));
  const std::size_t n_neg = std::min(neg.size(), static_cast<std::size_t>(cfg.rpn_batch) - n_pos);

  SamplingPlan plan;
  for (std::size_t i = 0; i < n_pos; ++i) {
    const int a = pos[i];
    plan.anchors.push_back({a, 1, normalize_deltas(encode_deltas(gt[match.matched[a]], anchors[a]))});
  }
  for (std::size_t i = 0; i < n_neg; ++i) plan.anchors.push_back({neg[i], 0, {}});

  std::vector<img::Box> candidates;
  for (const img::ScoredBox& p : propose(fw, cfg.train_pre_nms, cfg.train_proposals, kRpnTrainNms, 1.0)) {
    candidates.push_back(p.box);
  }
  candidates.insert(candidates.end(), gt.begin(), gt.end());
  for (const RoiDraw& d : sample_rois(candidates, gt, cfg.rois_per_image, cfg.positive_fraction, rng)) {
    RoiSample r;
    r.roi = d.roi;
    if (d.gt >= 0) {
      r.label = 1;
      r.target = normalize_deltas(encode_deltas(gt[d.gt], d.roi));
      r.mask = mask_target(sample.gt[d.gt], d.roi, sample.view_to_truth, mask_size);
    }
    plan.rois.push_back(std::move(r));
  }
  return plan;
}

TrainResult train(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                  const TrainConfig& cfg, const ModelConfig& model, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::vector<LoadedSlap> slaps = load_slaps(manifest, slap_ids);
  TrainResult res;
  res.params = init_params(model, derive_seed(cfg.rng_seed, "init"));
  ModelParams last_good = res.params;
  Rng rng(derive_seed(cfg.rng_seed, "train"));
  std::vector<Tensor> velocity;
  std::vector<std::size_t> order(slaps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    LossBreakdown sum;
    for (std::size_t idx : order) {
      const double offset = cfg.angle_jitter > 0 ? rng.uniform(-cfg.angle_jitter, cfg.angle_jitter) : 0.0;
      const TrainSample sample = make_train_sample(slaps[idx].image, *slaps[idx].truth, offset);
      const Forward fw(res.params, sample.input);
      const SamplingPlan plan = make_plan(fw, sample, cfg, model.mask_size(), rng);
      std::vector<Tensor> grads = zeros_like(res.params);
      const LossBreakdown loss = fw.loss(plan, cfg.lambda, &grads);
      try {
        if (!std::isfinite(loss.total)) throw DivergenceError("non-finite loss");
        last_good.tensors = res.params.tensors;
        sgd_step(res.params.tensors, grads, cfg.sgd, velocity);
      } catch (const DivergenceError& e) {
        // A non-finite loss means the latest step already went bad.
        std::string where = "epoch " + std::to_string(epoch);
        if (!cfg.last_good_path.empty()) {
          save_model(last_good, cfg.last_good_path);
          where += "; last good parameters saved to " + cfg.last_good_path.string();
        }
        throw DivergenceError(std::string("training diverged (") + e.what() + ") at " + where);
      }
      add_into(sum, loss);
    }
    EpochLoss e{epoch, scaled(sum, 1.0 / static_cast<double>(slaps.size()))};
    res.curve.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return res;
}

TrainResult train(const synth::DatasetManifest& manifest, const synth::SplitAssignment& split,
                  const TrainConfig& cfg, const ModelConfig& model, const EpochCallback& on_epoch) {
  return train(manifest, synth::split_slaps(manifest, split, synth::Partition::kTrain), cfg, model, on_epoch);
}

LossBreakdown initial_loss(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                           const TrainConfig& cfg, const ModelConfig& model, int images) {
  std::vector<std::string> ids(slap_ids.begin(), slap_ids.begin() + std::min<std::size_t>(slap_ids.size(), images));
  const std::vector<LoadedSlap> slaps = load_slaps(manifest, ids);
  const ModelParams params = init_params(model, derive_seed(cfg.rng_seed, "init"));
  Rng rng(derive_seed(cfg.rng_seed, "train"));
  LossBreakdown sum;
  for (const LoadedSlap& s : slaps) {
    const TrainSample sample = make_train_sample(s.image, *s.truth, 0.0);
    const Forward fw(params, sample.input);
    add_into(sum, fw.loss(make_plan(fw, sample, cfg, model.mask_size(), rng), cfg.lambda, nullptr));
  }
  return scaled(sum, 1.0 / static_cast<double>(slaps.size()));
}

void write_loss_curve(const std::vector<EpochLoss>& curve, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write loss curve " + path.string());
  out << "epoch,l_cls,l_box,l_mask,total\n" << std::setprecision(10);
  for (const EpochLoss& e : curve) {
    out << e.epoch << ',' << e.mean.l_cls << ',' << e.mean.l_box << ',' << e.mean.l_mask << ',' << e.mean.total
        << '\n';
  }
}

}  // namespace slapseg::det
