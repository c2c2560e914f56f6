#include "slapseg/detnet/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "slapseg/common/error.hpp"

namespace slapseg::det {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void check_conv_input(const Tensor& x, const Tensor& w, const ConvShape& s) {
  if (x.shape.size() != 3 || x.dim(0) != s.in_channels) {
    throw ValidationError("conv2d input " + x.shape_string() + " does not have " + std::to_string(s.in_channels) +
                          " channels");
  }
  if (w.size() != static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel) {
    throw ValidationError("conv2d weight " + w.shape_string() + " does not match layer shape");
  }
}

// Column matrix (Cin*k*k, Ho*Wo), row-major.
std::vector<double> im2col(const Tensor& x, const ConvShape& s, int ho, int wo) {
  const int h = x.dim(1);
  const int w = x.dim(2);
  const int k = s.kernel;
  std::vector<double> col(static_cast<std::size_t>(s.in_channels) * k * k * ho * wo, 0.0);
  std::size_t row = 0;
  for (int c = 0; c < s.in_channels; ++c) {
    const double* plane = x.data.data() + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        double* out = col.data() + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix >= 0 && ix < w) out[oy * wo + ox] = plane[iy * w + ix];
          }
        }
      }
    }
  }
  return col;
}

void col2im(const std::vector<double>& col, const ConvShape& s, int ho, int wo, Tensor& dx) {
  const int h = dx.dim(1);
  const int w = dx.dim(2);
  const int k = s.kernel;
  std::size_t row = 0;
  for (int c = 0; c < s.in_channels; ++c) {
    double* plane = dx.data.data() + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const double* in = col.data() + row * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += in[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

int conv_out_size(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const ConvShape& s) {
  check_conv_input(x, w, s);
  const int ho = conv_out_size(x.dim(1), s.kernel, s.stride, s.pad);
  const int wo = conv_out_size(x.dim(2), s.kernel, s.stride, s.pad);
  if (ho <= 0 || wo <= 0) throw ValidationError("conv2d input " + x.shape_string() + " is smaller than the kernel");
  const int kk = s.in_channels * s.kernel * s.kernel;
  const std::vector<double> col = im2col(x, s, ho, wo);
  Tensor y({s.out_channels, ho, wo});
  MapMat ym(y.data.data(), s.out_channels, ho * wo);
  ym.noalias() = ConstMapMat(w.data.data(), s.out_channels, kk) * ConstMapMat(col.data(), kk, ho * wo);
  for (int o = 0; o < s.out_channels; ++o) ym.row(o).array() += b[o];
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const ConvShape& s, const Tensor& dy, Tensor& dw, Tensor& db,
                     Tensor* dx) {
  check_conv_input(x, w, s);
  const int ho = dy.dim(1);
  const int wo = dy.dim(2);
  const int kk = s.in_channels * s.kernel * s.kernel;
  const std::vector<double> col = im2col(x, s, ho, wo);
  ConstMapMat dym(dy.data.data(), s.out_channels, ho * wo);
  MapMat(dw.data.data(), s.out_channels, kk).noalias() += dym * ConstMapMat(col.data(), kk, ho * wo).transpose();
  // Plain loops for the bias sums: Eigen's vectorized reductions peel by
  // buffer alignment, which makes the rounding depend on the allocator.
  for (int o = 0; o < s.out_channels; ++o) {
    double acc = 0.0;
    for (int i = 0; i < ho * wo; ++i) acc += dym(o, i);
    db[o] += acc;
  }
  if (dx) {
    std::vector<double> dcol(static_cast<std::size_t>(kk) * ho * wo);
    MapMat(dcol.data(), kk, ho * wo).noalias() = ConstMapMat(w.data.data(), s.out_channels, kk).transpose() * dym;
    *dx = Tensor(x.shape);
    col2im(dcol, s, ho, wo, *dx);
  }
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int n = x.dim(0);
  const int in = x.dim(1);
  const int out = w.dim(0);
  if (w.dim(1) != in) throw ValidationError("linear input " + x.shape_string() + " vs weight " + w.shape_string());
  Tensor y({n, out});
  MapMat ym(y.data.data(), n, out);
  ym.noalias() = ConstMapMat(x.data.data(), n, in) * ConstMapMat(w.data.data(), out, in).transpose();
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) ym(r, o) += b[o];
  }
  return y;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& db, Tensor* dx) {
  const int n = x.dim(0);
  const int in = x.dim(1);
  const int out = w.dim(0);
  ConstMapMat dym(dy.data.data(), n, out);
  MapMat(dw.data.data(), out, in).noalias() += dym.transpose() * ConstMapMat(x.data.data(), n, in);
  for (int o = 0; o < out; ++o) {
    double acc = 0.0;
    for (int r = 0; r < n; ++r) acc += dym(r, o);
    db[o] += acc;
  }
  if (dx) {
    *dx = Tensor({n, in});
    MapMat(dx->data.data(), n, in).noalias() = dym * ConstMapMat(w.data.data(), out, in);
  }
}

void relu_inplace(Tensor& x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) dy[i] = 0.0;
  }
}

Tensor upsample2x(const Tensor& x) {
  const int c = x.dim(0);
  const int h = x.dim(1);
  const int w = x.dim(2);
  Tensor y({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int yy = 0; yy < 2 * h; ++yy) {
      for (int xx = 0; xx < 2 * w; ++xx) {
        y[(static_cast<std::size_t>(ch) * 2 * h + yy) * 2 * w + xx] = x[(static_cast<std::size_t>(ch) * h + yy / 2) * w + xx / 2];
      }
    }
  }
  return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
  const int c = dy.dim(0);
  const int h = dy.dim(1) / 2;
  const int w = dy.dim(2) / 2;
  Tensor dx({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int yy = 0; yy < 2 * h; ++yy) {
      for (int xx = 0; xx < 2 * w; ++xx) {
        dx[(static_cast<std::size_t>(ch) * h + yy / 2) * w + xx / 2] += dy[(static_cast<std::size_t>(ch) * 2 * h + yy) * 2 * w + xx];
      }
    }
  }
  return dx;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace slapseg::det
