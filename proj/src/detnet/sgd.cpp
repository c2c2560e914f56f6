#include "slapseg/detnet/sgd.hpp"

#include <cmath>
#include <string>

#include "slapseg/common/error.hpp"

namespace slapseg::det {

void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, const SgdConfig& cfg,
              std::vector<Tensor>& velocity) {
  if (grads.size() != params.size()) throw ValidationError("sgd_step: gradient count differs from parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i])) {
      throw ValidationError("sgd_step: gradient " + std::to_string(i) + " has shape " + grads[i].shape_string() +
                            ", parameter has " + params[i].shape_string());
    }
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      if (!std::isfinite(grads[i][k])) {
        throw DivergenceError("non-finite gradient in tensor " + std::to_string(i) + " at element " +
                              std::to_string(k));
      }
    }
  }
  if (velocity.empty()) {
    for (const Tensor& p : params) velocity.emplace_back(p.shape);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Tensor& v = velocity[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = cfg.momentum * v[k] + g[k] + cfg.weight_decay * p[k];
      p[k] -= cfg.learning_rate * v[k];
    }
  }
}

}  // namespace slapseg::det
