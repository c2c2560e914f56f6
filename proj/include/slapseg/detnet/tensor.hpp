#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace slapseg::det {

/// Dense row-major double tensor. Feature maps are laid out (C, H, W).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(const std::vector<int>& dims);

}  // namespace slapseg::det
