#include "slapseg/detnet/tensor.hpp"

#include <algorithm>

#include "slapseg/common/error.hpp"

namespace slapseg::det {

std::size_t element_count(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 0) throw ValidationError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> dims, double fill) : shape(std::move(dims)), data(element_count(shape), fill) {}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace slapseg::det
