#pragma once

#include <vector>

#include "slapseg/detnet/tensor.hpp"

namespace slapseg::det {

struct SgdConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
};

/// v <- momentum * v + grad + decay * param; param <- param - lr * v.
/// `velocity` is created on first use. Throws DivergenceError naming the
/// tensor when a gradient is not finite; parameters are untouched then.
void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, const SgdConfig& cfg,
              std::vector<Tensor>& velocity);

}  // namespace slapseg::det
