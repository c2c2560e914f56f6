#pragma once

#include "slapseg/detnet/tensor.hpp"

namespace slapseg::det {

struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
};

int conv_out_size(int in, int kernel, int stride, int pad);

/// x: (Cin, H, W); w: (Cout, Cin*k*k); b: (Cout). Returns (Cout, Ho, Wo).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvShape& s);
/// Accumulates parameter gradients into dw/db and writes dx when given.
void conv2d_backward(const Tensor& x, const Tensor& w, const ConvShape& s, const Tensor& dy, Tensor& dw, Tensor& db,
                     Tensor* dx);

/// x: (N, in); w: (out, in); b: (out). Returns (N, out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& db, Tensor* dx);

void relu_inplace(Tensor& x);
/// Zeroes dy wherever the forward output y was not positive.
void relu_backward(const Tensor& y, Tensor& dy);

/// Nearest-neighbour 2x upsampling of a (C, H, W) tensor.
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

double sigmoid(double z);

}  // namespace slapseg::det
