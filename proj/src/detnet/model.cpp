#include "slapseg/detnet/model.hpp"

#include <cmath>
#include <cstring>

#include "slapseg/common/digest.hpp"
#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"
#include "slapseg/detnet/layers.hpp"
#include "slapseg/imgcore/roi_align.hpp"

namespace slapseg::det {

namespace {

constexpr int kA = AnchorConfig::kPerPosition;

// Offset between feature cell centers and image coordinates after four
// stride-2 convolutions with padding 1: x_img = 16 x_feat - 7.5.
constexpr double kFeatureOffset = 7.5;

ConvShape conv3(int in, int out, int stride) { return {in, out, 3, stride, 1}; }
ConvShape conv1(int in, int out) { return {in, out, 1, 1, 0}; }

struct Shapes {
  ConvShape c1, c2, c3a, c3b, c4a, c4b, rpn, rpn_cls, rpn_box, m1, m2, mout;
  explicit Shapes(const ModelConfig& c)
      : c1(conv3(1, c.channels[0], 2)),
        c2(conv3(c.channels[0], c.channels[1], 2)),
        c3a(conv3(c.channels[1], c.channels[2], 2)),
        c3b(conv3(c.channels[2], c.channels[2], 1)),
        c4a(conv3(c.channels[2], c.channels[3], 2)),
        c4b(conv3(c.channels[3], c.channels[3], 1)),
        rpn(conv3(c.channels[3], c.rpn_channels, 1)),
        rpn_cls(conv1(c.rpn_channels, kA)),
        rpn_box(conv1(c.rpn_channels, 4 * kA)),
        m1(conv3(c.channels[3], c.mask_channels, 1)),
        m2(conv3(c.mask_channels, c.mask_channels, 1)),
        mout(conv1(c.mask_channels, c.num_classes)) {}
};

std::vector<int> conv_w(const ConvShape& s) { return {s.out_channels, s.in_channels * s.kernel * s.kernel}; }
std::vector<int> conv_b(const ConvShape& s) { return {s.out_channels}; }

Tensor conv_relu(const Tensor& x, const ModelParams& p, Param w, const ConvShape& s) {
  Tensor y = conv2d(x, p[w], p[static_cast<Param>(w + 1)], s);
  relu_inplace(y);
  return y;
}

// Backward through relu(conv(x)); y is the layer output. Returns dx.
Tensor conv_relu_backward(const Tensor& x, const Tensor& y, Tensor dy, const ModelParams& p, Param w,
                          const ConvShape& s, std::vector<Tensor>& g, bool need_dx = true) {
  relu_backward(y, dy);
  Tensor dx;
  conv2d_backward(x, p[w], s, dy, g[w], g[w + 1], need_dx ? &dx : nullptr);
  return dx;
}

img::FeatureView view_of(const Tensor& f) { return {f.dim(0), f.dim(1), f.dim(2), f.data}; }

struct BoxHeadCache {
  Tensor pooled, h1, h2, cls, box;
};

BoxHeadCache run_box_head(const ModelParams& p, const Tensor& features, std::span<const img::Box> rois) {
  const ModelConfig& c = p.config;
  const int n = static_cast<int>(rois.size());
  const int flat = c.channels[3] * c.box_pool * c.box_pool;
  BoxHeadCache h;
  h.pooled = Tensor({n, flat});
  const img::RoiAlignParams rp{c.box_pool, c.sampling_ratio};
  for (int i = 0; i < n; ++i) {
    const std::vector<double> v = img::roi_align(view_of(features), to_feature_coords(rois[i]), rp);
    std::copy(v.begin(), v.end(), h.pooled.data.begin() + static_cast<std::ptrdiff_t>(i) * flat);
  }
  h.h1 = linear(h.pooled, p[kFc1W], p[kFc1B]);
  relu_inplace(h.h1);
  h.h2 = linear(h.h1, p[kFc2W], p[kFc2B]);
  relu_inplace(h.h2);
  h.cls = linear(h.h2, p[kHeadClsW], p[kHeadClsB]);
  h.box = linear(h.h2, p[kHeadBoxW], p[kHeadBoxB]);
  return h;
}

struct MaskHeadCache {
  Tensor pooled, a1, up, a2, out;
};

MaskHeadCache run_mask_head(const ModelParams& p, const Shapes& s, const Tensor& features, const img::Box& roi) {
  const ModelConfig& c = p.config;
  MaskHeadCache h;
  const std::vector<double> v =
      img::roi_align(view_of(features), to_feature_coords(roi), {c.mask_pool, c.sampling_ratio});
  h.pooled = Tensor({c.channels[3], c.mask_pool, c.mask_pool});
  h.pooled.data = v;
  h.a1 = conv_relu(h.pooled, p, kMask1W, s.m1);
  h.up = upsample2x(h.a1);
  h.a2 = conv_relu(h.up, p, kMask2W, s.m2);
  h.out = conv2d(h.a2, p[kMaskOutW], p[kMaskOutB], s.mout);
  return h;
}

}  // namespace

void ModelConfig::validate() const {
  anchors.validate();
  if (anchors.stride != kBackboneStride) {
    throw ValidationError("anchor stride must equal the backbone stride " + std::to_string(kBackboneStride));
  }
  for (int ch : channels) {
    if (ch < 1) throw ValidationError("backbone channels must be positive");
  }
  if (rpn_channels < 1 || head_hidden < 1 || box_pool < 1 || mask_pool < 1 || mask_channels < 1 ||
      sampling_ratio < 1 || num_classes < 1) {
    throw ValidationError("model sizes must be positive");
  }
}

const std::vector<std::string>& param_names() {
  static const std::vector<std::string> names{
      "backbone.conv1.w", "backbone.conv1.b", "backbone.conv2.w", "backbone.conv2.b",
      "backbone.conv3a.w", "backbone.conv3a.b", "backbone.conv3b.w", "backbone.conv3b.b",
      "backbone.conv4a.w", "backbone.conv4a.b", "backbone.conv4b.w", "backbone.conv4b.b",
      "rpn.conv.w", "rpn.conv.b", "rpn.cls.w", "rpn.cls.b", "rpn.box.w", "rpn.box.b",
      "head.fc1.w", "head.fc1.b", "head.fc2.w", "head.fc2.b", "head.cls.w", "head.cls.b",
      "head.box.w", "head.box.b", "mask.conv1.w", "mask.conv1.b", "mask.conv2.w", "mask.conv2.b",
      "mask.out.w", "mask.out.b"};
  return names;
}

std::vector<std::vector<int>> param_shapes(const ModelConfig& c) {
  const Shapes s(c);
  const int flat = c.channels[3] * c.box_pool * c.box_pool;
  return {conv_w(s.c1),      conv_b(s.c1),      conv_w(s.c2),    conv_b(s.c2),   conv_w(s.c3a),
          conv_b(s.c3a),     conv_w(s.c3b),     conv_b(s.c3b),   conv_w(s.c4a),  conv_b(s.c4a),
          conv_w(s.c4b),     conv_b(s.c4b),     conv_w(s.rpn),   conv_b(s.rpn),  conv_w(s.rpn_cls),
          conv_b(s.rpn_cls), conv_w(s.rpn_box), conv_b(s.rpn_box), {c.head_hidden, flat}, {c.head_hidden},
          {c.head_hidden, c.head_hidden}, {c.head_hidden}, {1, c.head_hidden}, {1}, {4, c.head_hidden}, {4},
          conv_w(s.m1),      conv_b(s.m1),      conv_w(s.m2),    conv_b(s.m2),   conv_w(s.mout),
          conv_b(s.mout)};
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.size();
  return n;
}

std::string ModelParams::digest() const {
  Sha256 h;
  const auto put_int = [&](long long v) { h.update(&v, sizeof v); };
  for (double s : config.anchors.scales) h.update(&s, sizeof s);
  for (double r : config.anchors.ratios) h.update(&r, sizeof r);
  put_int(config.anchors.stride);
  for (int ch : config.channels) put_int(ch);
  for (int v : {config.rpn_channels, config.head_hidden, config.box_pool, config.mask_pool, config.mask_channels,
                config.sampling_ratio, config.num_classes}) {
    put_int(v);
  }
  for (const Tensor& t : tensors) {
    put_int(static_cast<long long>(t.size()));
    h.update(t.data.data(), t.size() * sizeof(double));
  }
  return h.hex_digest();
}

void ModelParams::validate() const {
  config.validate();
  const auto shapes = param_shapes(config);
  if (tensors.size() != shapes.size()) throw ValidationError("model has the wrong number of tensors");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors[i].shape != shapes[i]) {
      throw ValidationError("tensor " + param_names()[i] + " has shape " + tensors[i].shape_string());
    }
    for (double v : tensors[i].data) {
      if (!std::isfinite(v)) throw ValidationError("tensor " + param_names()[i] + " has non-finite values");
    }
  }
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const auto shapes = param_shapes(cfg);
  Rng rng(derive_seed(seed, "init-params"));
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t(shapes[i]);
    if (shapes[i].size() == 2) {
      const int fan_in = shapes[i][1];
      double sigma = std::sqrt(2.0 / fan_in);
      // Output layers start near zero so every classifier begins
      // uninformative and regressions begin at the anchor or ROI.
      if (i == kRpnClsW || i == kHeadClsW) sigma = 0.01;
      if (i == kRpnBoxW || i == kHeadBoxW || i == kMaskOutW) sigma = 0.001;
      for (double& v : t.data) v = rng.normal(0.0, sigma);
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

std::vector<Tensor> zeros_like(const ModelParams& p) {
  std::vector<Tensor> g;
  g.reserve(p.tensors.size());
  for (const Tensor& t : p.tensors) g.emplace_back(t.shape);
  return g;
}

Tensor image_to_input(const img::GrayImage& image) {
  Tensor t({1, image.height(), image.width()});
  const auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) t[i] = (255.0 - px[i]) / 255.0;
  return t;
}

img::Box to_feature_coords(const img::Box& b) {
  constexpr double s = ModelConfig::kBackboneStride;
  return {(b.left + kFeatureOffset) / s, (b.top + kFeatureOffset) / s, (b.right + kFeatureOffset) / s,
          (b.bottom + kFeatureOffset) / s};
}

Forward::Forward(const ModelParams& params, Tensor input) : p_(params), input_(std::move(input)) {
  const ModelConfig& c = p_.config;
  constexpr int stride = ModelConfig::kBackboneStride;
  if (input_.shape.size() != 3 || input_.dim(0) != 1) throw ValidationError("input must be (1, H, W)");
  if (input_.dim(1) % stride != 0 || input_.dim(2) % stride != 0 || input_.dim(1) < stride ||
      input_.dim(2) < stride) {
    throw ValidationError("input " + input_.shape_string() + " is not a positive multiple of stride " +
                          std::to_string(stride));
  }
  const Shapes s(c);
  c1_ = conv_relu(input_, p_, kC1W, s.c1);
  c2_ = conv_relu(c1_, p_, kC2W, s.c2);
  c3a_ = conv_relu(c2_, p_, kC3aW, s.c3a);
  c3b_ = conv_relu(c3a_, p_, kC3bW, s.c3b);
  c4a_ = conv_relu(c3b_, p_, kC4aW, s.c4a);
  c4b_ = conv_relu(c4a_, p_, kC4bW, s.c4b);
  rpn_ = conv_relu(c4b_, p_, kRpnW, s.rpn);
  rpn_cls_ = conv2d(rpn_, p_[kRpnClsW], p_[kRpnClsB], s.rpn_cls);
  rpn_box_ = conv2d(rpn_, p_[kRpnBoxW], p_[kRpnBoxB], s.rpn_box);

  anchors_ = generate_anchors(image_width(), image_height(), c.anchors);
  const int gh = c4b_.dim(1);
  const int gw = c4b_.dim(2);
  const std::size_t plane = static_cast<std::size_t>(gh) * gw;
  objectness_.resize(anchors_.size());
  rpn_deltas_.resize(anchors_.size());
  for (std::size_t pos = 0; pos < plane; ++pos) {
    for (int a = 0; a < kA; ++a) {
      const std::size_t idx = pos * kA + a;
      objectness_[idx] = rpn_cls_[a * plane + pos];
      for (int k = 0; k < 4; ++k) rpn_deltas_[idx][k] = rpn_box_[(a * 4 + k) * plane + pos];
    }
  }
}

BoxHeadOut Forward::box_head(std::span<const img::Box> rois) const {
  BoxHeadOut out;
  if (rois.empty()) return out;
  const BoxHeadCache h = run_box_head(p_, c4b_, rois);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    out.logits.push_back(h.cls[i]);
    out.deltas.push_back({h.box[i * 4], h.box[i * 4 + 1], h.box[i * 4 + 2], h.box[i * 4 + 3]});
  }
  return out;
}

std::vector<std::vector<double>> Forward::mask_head(std::span<const img::Box> rois) const {
  const Shapes s(p_.config);
  std::vector<std::vector<double>> out;
  for (const img::Box& r : rois) out.push_back(run_mask_head(p_, s, c4b_, r).out.data);
  return out;
}

LossBreakdown Forward::loss(const SamplingPlan& plan, double lambda, std::vector<Tensor>* grads) const {
  const ModelConfig& c = p_.config;
  const Shapes s(c);

  std::vector<img::Box> rois;
  for (const RoiSample& r : plan.rois) rois.push_back(r.roi);
  BoxHeadCache head;
  if (!rois.empty()) head = run_box_head(p_, c4b_, rois);

  std::vector<ClsTerm> cls;
  std::vector<BoxTerm> box;
  std::vector<int> box_source;  // >= 0: anchor sample index, < 0: -(roi index) - 1
  for (std::size_t i = 0; i < plan.anchors.size(); ++i) {
    const AnchorSample& a = plan.anchors[i];
    cls.push_back({objectness_.at(a.anchor), a.label});
    if (a.label == 1) {
      box.push_back({rpn_deltas_[a.anchor], a.target, 1});
      box_source.push_back(static_cast<int>(i));
    }
  }
  std::vector<MaskTerm> masks;
  std::vector<MaskHeadCache> mask_cache;
  std::vector<std::size_t> mask_roi;
  for (std::size_t i = 0; i < plan.rois.size(); ++i) {
    const RoiSample& r = plan.rois[i];
    cls.push_back({head.cls[i], r.label});
    if (r.label == 1) {
      box.push_back({{head.box[i * 4], head.box[i * 4 + 1], head.box[i * 4 + 2], head.box[i * 4 + 3]}, r.target, 1});
      box_source.push_back(-static_cast<int>(i) - 1);
      mask_cache.push_back(run_mask_head(p_, s, c4b_, r.roi));
      masks.push_back({mask_cache.back().out.data, r.mask});
      mask_roi.push_back(i);
    }
  }
  if (cls.empty()) throw ValidationError("sampling plan is empty");

  LossWeights w;
  w.lambda = lambda;
  w.n_cls = static_cast<double>(cls.size());
  w.n_box = static_cast<double>(std::max<std::size_t>(1, box.size()));
  LossGrads lg;
  const LossBreakdown out = total_loss(cls, box, masks, w, grads ? &lg : nullptr);
  if (!grads) return out;
  std::vector<Tensor>& g = *grads;

  // Scatter head-input gradients.
  const int gh = c4b_.dim(1);
  const int gw = c4b_.dim(2);
  const std::size_t plane = static_cast<std::size_t>(gh) * gw;
  Tensor d_rpn_cls(rpn_cls_.shape);
  Tensor d_rpn_box(rpn_box_.shape);
  Tensor d_head_cls({static_cast<int>(rois.size()), 1});
  Tensor d_head_box({static_cast<int>(rois.size()), 4});
  for (std::size_t i = 0; i < plan.anchors.size(); ++i) {
    const std::size_t a = plan.anchors[i].anchor;
    d_rpn_cls[(a % kA) * plane + a / kA] += lg.cls[i];
  }
  for (std::size_t i = 0; i < rois.size(); ++i) d_head_cls[i] = lg.cls[plan.anchors.size() + i];
  for (std::size_t b = 0; b < box.size(); ++b) {
    if (box_source[b] >= 0) {
      const std::size_t a = plan.anchors[box_source[b]].anchor;
      for (int k = 0; k < 4; ++k) d_rpn_box[((a % kA) * 4 + k) * plane + a / kA] += lg.box[b][k];
    } else {
      const std::size_t r = -box_source[b] - 1;
      for (int k = 0; k < 4; ++k) d_head_box[r * 4 + k] += lg.box[b][k];
    }
  }

  Tensor d_feat(c4b_.shape);
  const std::span<double> d_feat_span(d_feat.data);

  if (!rois.empty()) {
    Tensor dh2;
    linear_backward(head.h2, p_[kHeadClsW], d_head_cls, g[kHeadClsW], g[kHeadClsB], &dh2);
    Tensor dh2_box;
    linear_backward(head.h2, p_[kHeadBoxW], d_head_box, g[kHeadBoxW], g[kHeadBoxB], &dh2_box);
    for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] += dh2_box[i];
    relu_backward(head.h2, dh2);
    Tensor dh1;
    linear_backward(head.h1, p_[kFc2W], dh2, g[kFc2W], g[kFc2B], &dh1);
    relu_backward(head.h1, dh1);
    Tensor dpooled;
    linear_backward(head.pooled, p_[kFc1W], dh1, g[kFc1W], g[kFc1B], &dpooled);
    const int flat = head.pooled.dim(1);
    for (std::size_t i = 0; i < rois.size(); ++i) {
      img::roi_align_backward(c4b_.dim(0), gh, gw, to_feature_coords(rois[i]), {c.box_pool, c.sampling_ratio},
                              std::span<const double>(dpooled.data).subspan(i * flat, flat), d_feat_span);
    }
  }

  for (std::size_t m = 0; m < masks.size(); ++m) {
    const MaskHeadCache& h = mask_cache[m];
    Tensor d_out(h.out.shape);
    d_out.data = lg.mask[m];
    Tensor d_a2;
    conv2d_backward(h.a2, p_[kMaskOutW], s.mout, d_out, g[kMaskOutW], g[kMaskOutB], &d_a2);
    Tensor d_up = conv_relu_backward(h.up, h.a2, std::move(d_a2), p_, kMask2W, s.m2, g);
    Tensor d_a1 = upsample2x_backward(d_up);
    Tensor d_pooled = conv_relu_backward(h.pooled, h.a1, std::move(d_a1), p_, kMask1W, s.m1, g);
    img::roi_align_backward(c4b_.dim(0), gh, gw, to_feature_coords(plan.rois[mask_roi[m]].roi),
                            {c.mask_pool, c.sampling_ratio}, d_pooled.data, d_feat_span);
  }

  Tensor d_rpn;
  conv2d_backward(rpn_, p_[kRpnClsW], s.rpn_cls, d_rpn_cls, g[kRpnClsW], g[kRpnClsB], &d_rpn);
  Tensor d_rpn_b;
  conv2d_backward(rpn_, p_[kRpnBoxW], s.rpn_box, d_rpn_box, g[kRpnBoxW], g[kRpnBoxB], &d_rpn_b);
  for (std::size_t i = 0; i < d_rpn.size(); ++i) d_rpn[i] += d_rpn_b[i];
  Tensor d_c4b_rpn = conv_relu_backward(c4b_, rpn_, std::move(d_rpn), p_, kRpnW, s.rpn, g);
  for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat[i] += d_c4b_rpn[i];

  Tensor d = conv_relu_backward(c4a_, c4b_, std::move(d_feat), p_, kC4bW, s.c4b, g);
  d = conv_relu_backward(c3b_, c4a_, std::move(d), p_, kC4aW, s.c4a, g);
  d = conv_relu_backward(c3a_, c3b_, std::move(d), p_, kC3bW, s.c3b, g);
  d = conv_relu_backward(c2_, c3a_, std::move(d), p_, kC3aW, s.c3a, g);
  d = conv_relu_backward(c1_, c2_, std::move(d), p_, kC2W, s.c2, g);
  conv_relu_backward(input_, c1_, std::move(d), p_, kC1W, s.c1, g, false);
  return out;
}

}  // namespace slapseg::det
