#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace slapseg::det {

inline constexpr double kProbEps = 1e-7;

/// -[p* ln p + (1 - p*) ln(1 - p)] with p clamped to [eps, 1 - eps].
double cls_log_loss(double p, int p_star);
/// Same loss on a pre-sigmoid logit; writes d loss / d logit when asked.
double cls_log_loss_logit(double logit, int p_star, double* grad = nullptr);

double smooth_l1(double x);
double smooth_l1_grad(double x);

/// Mask target for one positive ROI: m x m binary grid for category k.
struct MaskTarget {
  int m = 0;
  int k = 0;
  std::vector<std::uint8_t> y;
};

/// Mean binary cross-entropy over the m x m cells of channel k of `pred`
/// (probabilities, layout (K, m, m)). Other channels are ignored.
double mask_bce(std::span<const double> pred, const MaskTarget& target);
/// Same loss on logits; accumulates d loss / d logit into `grad` (channel k only).
double mask_bce_logits(std::span<const double> logits, const MaskTarget& target, std::span<double> grad);

struct LossWeights {
  double lambda = 1.0;
  double n_cls = 1.0;
  double n_box = 1.0;
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_box = 0.0;
  double l_mask = 0.0;
  double total = 0.0;
};

/// One objectness (RPN anchor or head ROI) classification term.
struct ClsTerm {
  double logit = 0.0;
  int label = 0;
};

/// One box regression term; p_star gates it (0 terms contribute nothing).
struct BoxTerm {
  std::array<double, 4> pred{};
  std::array<double, 4> target{};
  int p_star = 1;
};

struct MaskTerm {
  std::vector<double> logits;  // (K, m, m)
  MaskTarget target;
};

/// Gradients of total_loss with respect to each term's inputs.
struct LossGrads {
  std::vector<double> cls;
  std::vector<std::array<double, 4>> box;
  std::vector<std::vector<double>> mask;
};

/// l_cls = (1/N_cls) sum cls; l_box = (lambda/N_box) sum p* smooth_l1;
/// l_mask = mean mask_bce over mask terms; total = l_cls + l_box + l_mask.
LossBreakdown total_loss(std::span<const ClsTerm> cls, std::span<const BoxTerm> box, std::span<const MaskTerm> mask,
                         const LossWeights& w, LossGrads* grads = nullptr);

}  // namespace slapseg::det
