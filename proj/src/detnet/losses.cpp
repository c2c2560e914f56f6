#include "slapseg/detnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "slapseg/common/error.hpp"
#include "slapseg/detnet/layers.hpp"

namespace slapseg::det {

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

void check_mask(std::size_t n, const MaskTarget& t) {
  const std::size_t cells = static_cast<std::size_t>(t.m) * t.m;
  if (t.m <= 0 || t.y.size() != cells) throw ValidationError("mask target size mismatch");
  if (t.k < 0 || n < cells * (t.k + 1) || n % cells != 0) throw ValidationError("mask prediction lacks channel k");
}

}  // namespace

double cls_log_loss(double p, int p_star) {
  const double q = clamp_prob(p);
  return p_star ? -std::log(q) : -std::log(1.0 - q);
}

double cls_log_loss_logit(double logit, int p_star, double* grad) {
  const double p = sigmoid(logit);
  if (grad) {
    // Inside the clamp the derivative is p - p*; once clamped it is flat.
    const bool clamped = p_star ? p < kProbEps : p > 1.0 - kProbEps;
    *grad = clamped ? 0.0 : p - p_star;
  }
  return cls_log_loss(p, p_star);
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

double mask_bce(std::span<const double> pred, const MaskTarget& target) {
  check_mask(pred.size(), target);
  const std::size_t cells = static_cast<std::size_t>(target.m) * target.m;
  const double* p = pred.data() + cells * target.k;
  double sum = 0.0;
  for (std::size_t i = 0; i < cells; ++i) sum += cls_log_loss(p[i], target.y[i] ? 1 : 0);
  return sum / static_cast<double>(cells);
}

double mask_bce_logits(std::span<const double> logits, const MaskTarget& target, std::span<double> grad) {
  check_mask(logits.size(), target);
  const std::size_t cells = static_cast<std::size_t>(target.m) * target.m;
  const std::size_t off = cells * target.k;
  double sum = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    double g = 0.0;
    sum += cls_log_loss_logit(logits[off + i], target.y[i] ? 1 : 0, &g);
    if (!grad.empty()) grad[off + i] += g / static_cast<double>(cells);
  }
  return sum / static_cast<double>(cells);
}

LossBreakdown total_loss(std::span<const ClsTerm> cls, std::span<const BoxTerm> box, std::span<const MaskTerm> mask,
                         const LossWeights& w, LossGrads* grads) {
  if (!(w.lambda > 0) || !(w.n_cls > 0) || !(w.n_box > 0)) throw ValidationError("loss weights must be positive");
  LossBreakdown out;
  if (grads) {
    grads->cls.assign(cls.size(), 0.0);
    grads->box.assign(box.size(), {0, 0, 0, 0});
    grads->mask.assign(mask.size(), {});
  }
  for (std::size_t i = 0; i < cls.size(); ++i) {
    double g = 0.0;
    out.l_cls += cls_log_loss_logit(cls[i].logit, cls[i].label, grads ? &g : nullptr);
    if (grads) grads->cls[i] = g / w.n_cls;
  }
  out.l_cls /= w.n_cls;

  bool any_positive = false;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!box[i].p_star) continue;
    any_positive = true;
    for (int c = 0; c < 4; ++c) {
      const double d = box[i].pred[c] - box[i].target[c];
      out.l_box += smooth_l1(d);
      if (grads) grads->box[i][c] = w.lambda / w.n_box * smooth_l1_grad(d);
    }
  }
  out.l_box = any_positive ? w.lambda / w.n_box * out.l_box : 0.0;

  for (std::size_t i = 0; i < mask.size(); ++i) {
    std::vector<double> g;
    if (grads) g.assign(mask[i].logits.size(), 0.0);
    out.l_mask += mask_bce_logits(mask[i].logits, mask[i].target, g);
    if (grads) {
      for (double& v : g) v /= static_cast<double>(mask.size());
      grads->mask[i] = std::move(g);
    }
  }
  if (!mask.empty()) out.l_mask /= static_cast<double>(mask.size());

  out.total = out.l_cls + out.l_box + out.l_mask;
  return out;
}

}  // namespace slapseg::det
