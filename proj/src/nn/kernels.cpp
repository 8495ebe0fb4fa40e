#include "lfdeocc/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lfdeocc::nn::kernels {

namespace {

constexpr std::size_t kBlock = 512;

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw std::invalid_argument(std::string(what) + ": expected NCHW tensor, got " + shape_string(s));
}

// Geometry of one regular convolution instance.
struct Plan {
  std::size_t cin, cout, k, stride, dilation, padding;
  std::size_t h, w, oh, ow;
  std::size_t rows() const { return cin * k * k; }
  std::size_t positions() const { return oh * ow; }
};

Plan make_plan(const ConvGeometry& g, std::size_t h, std::size_t w) {
  Plan p{g.in_channels, g.out_channels, g.kernel, g.stride, g.dilation, g.padding, h, w, 0, 0};
  p.oh = g.output_size(h);
  p.ow = g.output_size(w);
  if (p.oh == 0 || p.ow == 0) {
    throw std::invalid_argument("conv2d: input " + std::to_string(h) + "x" + std::to_string(w) +
                                " smaller than the padded kernel extent");
  }
  return p;
}

template <class T>
void im2col(const T* x, const Plan& p, std::vector<double>& cols) {
  const std::size_t P = p.positions();
  cols.assign(p.rows() * P, 0.0);
  for (std::size_t ci = 0; ci < p.cin; ++ci) {
    const T* plane = x + ci * p.h * p.w;
    for (std::size_t ky = 0; ky < p.k; ++ky) {
      for (std::size_t kx = 0; kx < p.k; ++kx) {
        double* row = &cols[((ci * p.k + ky) * p.k + kx) * P];
        for (std::size_t oy = 0; oy < p.oh; ++oy) {
          const long iy = static_cast<long>(oy * p.stride + ky * p.dilation) - static_cast<long>(p.padding);
          if (iy < 0 || iy >= static_cast<long>(p.h)) continue;
          const T* src = plane + static_cast<std::size_t>(iy) * p.w;
          double* dst = row + oy * p.ow;
          for (std::size_t ox = 0; ox < p.ow; ++ox) {
            const long ix = static_cast<long>(ox * p.stride + kx * p.dilation) - static_cast<long>(p.padding);
            if (ix >= 0 && ix < static_cast<long>(p.w)) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im(const std::vector<double>& cols, const Plan& p, double* x) {
  const std::size_t P = p.positions();
  for (std::size_t ci = 0; ci < p.cin; ++ci) {
    double* plane = x + ci * p.h * p.w;
    for (std::size_t ky = 0; ky < p.k; ++ky) {
      for (std::size_t kx = 0; kx < p.k; ++kx) {
        const double* row = &cols[((ci * p.k + ky) * p.k + kx) * P];
        for (std::size_t oy = 0; oy < p.oh; ++oy) {
          const long iy = static_cast<long>(oy * p.stride + ky * p.dilation) - static_cast<long>(p.padding);
          if (iy < 0 || iy >= static_cast<long>(p.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * p.w;
          const double* src = row + oy * p.ow;
          for (std::size_t ox = 0; ox < p.ow; ++ox) {
            const long ix = static_cast<long>(ox * p.stride + kx * p.dilation) - static_cast<long>(p.padding);
            if (ix >= 0 && ix < static_cast<long>(p.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// out[r, :] += sum_j a[r, j] * b[j, :], with a (R x J) and b (J x P), j ascending.
void gemm_accumulate(const double* a, const double* b, double* out, std::size_t R, std::size_t J, std::size_t P) {
  for (std::size_t p0 = 0; p0 < P; p0 += kBlock) {
    const std::size_t len = std::min(kBlock, P - p0);
    for (std::size_t r = 0; r < R; ++r) {
      double* dst = out + r * P + p0;
      for (std::size_t j = 0; j < J; ++j) {
        const double coef = a[r * J + j];
        if (coef == 0.0) continue;
        const double* src = b + j * P + p0;
        for (std::size_t t = 0; t < len; ++t) dst[t] += coef * src[t];
      }
    }
  }
}

template <class T>
std::vector<double> to_double(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

template <class T>
void check_conv_inputs(const BasicTensor<T>& x, const BasicTensor<T>& weight, const Shape& expected_weight,
                       std::size_t in_channels, const char* what) {
  require_rank4(x.shape(), what);
  if (x.dim(1) != in_channels) {
    throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(x.dim(1)) +
                                " channels, expected " + std::to_string(in_channels));
  }
  if (weight.shape() != expected_weight) {
    throw std::invalid_argument(std::string(what) + ": weight shape " + shape_string(weight.shape()) +
                                ", expected " + shape_string(expected_weight));
  }
}

ConvGeometry forward_of_transpose(const ConvGeometry& g) {
  ConvGeometry f = g;
  f.in_channels = g.out_channels;
  f.out_channels = g.in_channels;
  f.output_padding = 0;
  return f;
}

}  // namespace

std::size_t ConvGeometry::output_size(std::size_t in) const {
  const std::size_t padded = in + 2 * padding;
  if (padded < extent()) return 0;
  return (padded - extent()) / stride + 1;
}

std::size_t ConvGeometry::transpose_output_size(std::size_t in) const {
  const long v = static_cast<long>((in - 1) * stride) - 2 * static_cast<long>(padding) +
                 static_cast<long>(extent()) + static_cast<long>(output_padding);
  return v > 0 ? static_cast<std::size_t>(v) : 0;
}

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                              const ConvGeometry& g) {
  check_conv_inputs(x, weight, g.weight_shape(), g.in_channels, "conv2d");
  if (bias && bias->numel() != g.out_channels) throw std::invalid_argument("conv2d: bias size mismatch");
  const Plan p = make_plan(g, x.dim(2), x.dim(3));
  const std::size_t n_batch = x.dim(0);
  const std::size_t P = p.positions();
  BasicTensor<T> y({n_batch, p.cout, p.oh, p.ow});
  const std::vector<double> w = to_double(weight.data());
  std::vector<double> cols;
  std::vector<double> acc(p.cout * P);
  for (std::size_t n = 0; n < n_batch; ++n) {
    im2col(x.data().data() + n * p.cin * p.h * p.w, p, cols);
    std::fill(acc.begin(), acc.end(), 0.0);
    gemm_accumulate(w.data(), cols.data(), acc.data(), p.cout, p.rows(), P);
    T* dst = y.data().data() + n * p.cout * P;
    for (std::size_t co = 0; co < p.cout; ++co) {
      const double b = bias ? static_cast<double>((*bias)[co]) : 0.0;
      for (std::size_t i = 0; i < P; ++i) dst[co * P + i] = static_cast<T>(acc[co * P + i] + b);
    }
  }
  return y;
}

template <class T>
BasicTensor<T> conv2d_grad_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weight, const ConvGeometry& g,
                                 std::size_t in_h, std::size_t in_w) {
  require_rank4(grad_out.shape(), "conv2d_grad_input");
  if (weight.shape() != g.weight_shape()) throw std::invalid_argument("conv2d_grad_input: weight shape mismatch");
  const Plan p = make_plan(g, in_h, in_w);
  if (grad_out.dim(1) != p.cout || grad_out.dim(2) != p.oh || grad_out.dim(3) != p.ow) {
    throw std::invalid_argument("conv2d_grad_input: gradient shape " + shape_string(grad_out.shape()) +
                                " does not match the convolution output");
  }
  const std::size_t n_batch = grad_out.dim(0);
  const std::size_t P = p.positions();
  const std::size_t K = p.rows();
  // weight transposed to (K x cout) so the accumulation runs over output channels
  std::vector<double> wt(K * p.cout);
  for (std::size_t co = 0; co < p.cout; ++co) {
    for (std::size_t j = 0; j < K; ++j) wt[j * p.cout + co] = weight[co * K + j];
  }
  BasicTensor<T> gx({n_batch, p.cin, p.h, p.w});
  std::vector<double> dcols(K * P);
  std::vector<double> plane(p.cin * p.h * p.w);
  for (std::size_t n = 0; n < n_batch; ++n) {
    const auto gy = to_double(grad_out.data().subspan(n * p.cout * P, p.cout * P));
    std::fill(dcols.begin(), dcols.end(), 0.0);
    gemm_accumulate(wt.data(), gy.data(), dcols.data(), K, p.cout, P);
    std::fill(plane.begin(), plane.end(), 0.0);
    col2im(dcols, p, plane.data());
    T* dst = gx.data().data() + n * plane.size();
    for (std::size_t i = 0; i < plane.size(); ++i) dst[i] = static_cast<T>(plane[i]);
  }
  return gx;
}

template <class T>
BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, const ConvGeometry& g) {
  require_rank4(grad_out.shape(), "conv2d_grad_weight");
  require_rank4(x.shape(), "conv2d_grad_weight");
  const Plan p = make_plan(g, x.dim(2), x.dim(3));
  const std::size_t P = p.positions();
  const std::size_t K = p.rows();
  std::vector<double> gw(p.cout * K, 0.0);
  std::vector<double> cols;
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    im2col(x.data().data() + n * p.cin * p.h * p.w, p, cols);
    const auto gy = to_double(grad_out.data().subspan(n * p.cout * P, p.cout * P));
    for (std::size_t co = 0; co < p.cout; ++co) {
      for (std::size_t j = 0; j < K; ++j) gw[co * K + j] += dot(&gy[co * P], &cols[j * P], P);
    }
  }
  BasicTensor<T> out(g.weight_shape());
  for (std::size_t i = 0; i < gw.size(); ++i) out[i] = static_cast<T>(gw[i]);
  return out;
}

template <class T>
BasicTensor<T> channel_sum(const BasicTensor<T>& grad_out) {
  require_rank4(grad_out.shape(), "channel_sum");
  const std::size_t c = grad_out.dim(1);
  const std::size_t plane = grad_out.dim(2) * grad_out.dim(3);
  std::vector<double> acc(c, 0.0);
  for (std::size_t n = 0; n < grad_out.dim(0); ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = grad_out.data().data() + (n * c + ch) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += src[i];
      acc[ch] += s;
    }
  }
  BasicTensor<T> out({c});
  for (std::size_t ch = 0; ch < c; ++ch) out[ch] = static_cast<T>(acc[ch]);
  return out;
}

template <class T>
BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                                        const BasicTensor<T>* bias, const ConvGeometry& g) {
  check_conv_inputs(x, weight, g.transpose_weight_shape(), g.in_channels, "conv_transpose2d");
  if (g.output_padding >= std::max(g.stride, g.dilation)) {
    throw std::invalid_argument("conv_transpose2d: output_padding must be smaller than stride or dilation");
  }
  if (bias && bias->numel() != g.out_channels) throw std::invalid_argument("conv_transpose2d: bias size mismatch");
  const ConvGeometry f = forward_of_transpose(g);
  const std::size_t oh = g.transpose_output_size(x.dim(2));
  const std::size_t ow = g.transpose_output_size(x.dim(3));
  if (f.output_size(oh) != x.dim(2) || f.output_size(ow) != x.dim(3)) {
    throw std::invalid_argument("conv_transpose2d: geometry does not invert to the input size");
  }
  BasicTensor<T> y = conv2d_grad_input(x, weight, f, oh, ow);
  if (bias) {
    const std::size_t plane = oh * ow;
    for (std::size_t n = 0; n < y.dim(0); ++n) {
      for (std::size_t c = 0; c < g.out_channels; ++c) {
        T* dst = y.data().data() + (n * g.out_channels + c) * plane;
        const double b = (*bias)[c];
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(dst[i] + b);
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> conv_transpose2d_grad_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weight,
                                           const ConvGeometry& g) {
  return conv2d_forward<T>(grad_out, weight, nullptr, forward_of_transpose(g));
}

template <class T>
BasicTensor<T> conv_transpose2d_grad_weight(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                            const ConvGeometry& g) {
  // The transposed op is the adjoint of the forward conv, so its weight
  // gradient is the forward conv's with input and output roles swapped.
  return conv2d_grad_weight(x, grad_out, forward_of_transpose(g));
}

template <class T>
BasicTensor<T> batch_norm_train_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                        const BasicTensor<T>& beta, double eps, BatchNormSaved<T>& saved) {
  require_rank4(x.shape(), "batch_norm");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != C || beta.numel() != C) throw std::invalid_argument("batch_norm: affine size mismatch");
  const double m = static_cast<double>(N * plane);
  saved.mean.assign(C, 0.0);
  saved.var.assign(C, 0.0);
  saved.invstd.assign(C, 0.0);
  saved.normalized = BasicTensor<T>(x.shape());
  BasicTensor<T> y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* src = x.data().data() + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) s += src[i];
    }
    const double mean = s / m;
    double sq = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* src = x.data().data() + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double invstd = 1.0 / std::sqrt(var + eps);
    saved.mean[c] = mean;
    saved.var[c] = var;
    saved.invstd[c] = invstd;
    const double gm = gamma[c];
    const double bt = beta[c];
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - mean) * invstd;
        saved.normalized[off + i] = static_cast<T>(xh);
        y[off + i] = static_cast<T>(gm * xh + bt);
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> batch_norm_eval_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                       const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                       double eps) {
  require_rank4(x.shape(), "batch_norm");
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != C || beta.numel() != C || running_mean.numel() != C || running_var.numel() != C) {
    throw std::invalid_argument("batch_norm: parameter size mismatch");
  }
  BasicTensor<T> y(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
      const double scale = gamma[c] * invstd;
      const double shift = beta[c] - running_mean[c] * scale;
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) y[off + i] = static_cast<T>(x[off + i] * scale + shift);
    }
  }
  return y;
}

template <class T>
BatchNormGrads<T> batch_norm_train_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& gamma,
                                            const BatchNormSaved<T>& saved) {
  const BasicTensor<T>& xh = saved.normalized;
  const std::size_t N = xh.dim(0), C = xh.dim(1), plane = xh.dim(2) * xh.dim(3);
  const double m = static_cast<double>(N * plane);
  BatchNormGrads<T> g{BasicTensor<T>(xh.shape()), BasicTensor<T>({C}), BasicTensor<T>({C})};
  for (std::size_t c = 0; c < C; ++c) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += grad_out[off + i];
        sum_gx += static_cast<double>(grad_out[off + i]) * xh[off + i];
      }
    }
    g.beta[c] = static_cast<T>(sum_g);
    g.gamma[c] = static_cast<T>(sum_gx);
    const double k = gamma[c] * saved.invstd[c] / m;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        g.input[off + i] = static_cast<T>(k * (m * grad_out[off + i] - sum_g - xh[off + i] * sum_gx));
      }
    }
  }
  return g;
}

template <class T>
BatchNormGrads<T> batch_norm_eval_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                           const BasicTensor<T>& gamma, const BasicTensor<T>& running_mean,
                                           const BasicTensor<T>& running_var, double eps) {
  const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
  BatchNormGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>({C}), BasicTensor<T>({C})};
  for (std::size_t c = 0; c < C; ++c) {
    const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - running_mean[c]) * invstd;
        sum_g += grad_out[off + i];
        sum_gx += grad_out[off + i] * xh;
        g.input[off + i] = static_cast<T>(grad_out[off + i] * gamma[c] * invstd);
      }
    }
    g.beta[c] = static_cast<T>(sum_g);
    g.gamma[c] = static_cast<T>(sum_gx);
  }
  return g;
}

template <class T>
BasicTensor<T> leaky_relu_forward(const BasicTensor<T>& x, T slope) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] >= T{0} ? x[i] : slope * x[i];
  return y;
}

template <class T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, T slope) {
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) g[i] = x[i] >= T{0} ? grad_out[i] : slope * grad_out[i];
  return g;
}

template <class T>
BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = xs.front()->shape();
  require_rank4(first, "concat");
  std::size_t channels = 0;
  for (const BasicTensor<T>* x : xs) {
    require_rank4(x->shape(), "concat");
    if (x->dim(0) != first[0] || x->dim(2) != first[2] || x->dim(3) != first[3]) {
      throw std::invalid_argument("concat: shape mismatch " + shape_string(first) + " vs " + shape_string(x->shape()));
    }
    channels += x->dim(1);
  }
  const std::size_t plane = first[2] * first[3];
  BasicTensor<T> y({first[0], channels, first[2], first[3]});
  T* dst = y.data().data();
  for (std::size_t n = 0; n < first[0]; ++n) {
    for (const BasicTensor<T>* x : xs) {
      const std::size_t block = x->dim(1) * plane;
      const T* src = x->data().data() + n * block;
      dst = std::copy(src, src + block, dst);
    }
  }
  return y;
}

template <class T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t first, std::size_t count) {
  require_rank4(x.shape(), "slice_channels");
  if (first + count > x.dim(1)) throw std::invalid_argument("slice_channels: range out of bounds");
  const std::size_t plane = x.dim(2) * x.dim(3);
  BasicTensor<T> y({x.dim(0), count, x.dim(2), x.dim(3)});
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    const T* src = x.data().data() + (n * x.dim(1) + first) * plane;
    std::copy(src, src + count * plane, y.data().data() + n * count * plane);
  }
  return y;
}

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> y = a;
  add_inplace(y, b);
  return y;
}

template <class T>
void add_inplace(BasicTensor<T>& acc, const BasicTensor<T>& b) {
  if (acc.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + shape_string(acc.shape()) + " vs " + shape_string(b.shape()));
  }
  for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += b[i];
}

template <class T>
BasicTensor<T> crop_center(const BasicTensor<T>& x, std::size_t h, std::size_t w) {
  require_rank4(x.shape(), "crop_center");
  if (h > x.dim(2) || w > x.dim(3)) throw std::invalid_argument("crop_center: target larger than input");
  const std::size_t top = (x.dim(2) - h) / 2;
  const std::size_t left = (x.dim(3) - w) / 2;
  BasicTensor<T> y({x.dim(0), x.dim(1), h, w});
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    for (std::size_t c = 0; c < x.dim(1); ++c) {
      for (std::size_t r = 0; r < h; ++r) {
        const T* src = &x.at(n, c, top + r, left);
        std::copy(src, src + w, &y.at(n, c, r, 0));
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> uncrop_center(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  BasicTensor<T> g(input_shape);
  const std::size_t h = grad_out.dim(2), w = grad_out.dim(3);
  const std::size_t top = (input_shape[2] - h) / 2;
  const std::size_t left = (input_shape[3] - w) / 2;
  for (std::size_t n = 0; n < input_shape[0]; ++n) {
    for (std::size_t c = 0; c < input_shape[1]; ++c) {
      for (std::size_t r = 0; r < h; ++r) {
        const T* src = &grad_out.at(n, c, r, 0);
        std::copy(src, src + w, &g.at(n, c, top + r, left));
      }
    }
  }
  return g;
}

template <class T>
double mse(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                                shape_string(target.shape()));
  }
  if (pred.empty()) throw std::invalid_argument("mse_loss: empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.numel());
}

#define LFDEOCC_INSTANTIATE(T)                                                                                     \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,      \
                                         const ConvGeometry&);                                                     \
  template BasicTensor<T> conv2d_grad_input(const BasicTensor<T>&, const BasicTensor<T>&, const ConvGeometry&,     \
                                            std::size_t, std::size_t);                                             \
  template BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>&, const BasicTensor<T>&, const ConvGeometry&);   \
  template BasicTensor<T> channel_sum(const BasicTensor<T>&);                                                      \
  template BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                                   const BasicTensor<T>*, const ConvGeometry&);                    \
  template BasicTensor<T> conv_transpose2d_grad_input(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                                      const ConvGeometry&);                                        \
  template BasicTensor<T> conv_transpose2d_grad_weight(const BasicTensor<T>&, const BasicTensor<T>&,               \
                                                       const ConvGeometry&);                                       \
  template BasicTensor<T> batch_norm_train_forward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                                   const BasicTensor<T>&, double, BatchNormSaved<T>&);             \
  template BasicTensor<T> batch_norm_eval_forward(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                                  const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                                  const BasicTensor<T>&, double);                                  \
  template BatchNormGrads<T> batch_norm_train_backward(const BasicTensor<T>&, const BasicTensor<T>&,               \
                                                       const BatchNormSaved<T>&);                                  \
  template BatchNormGrads<T> batch_norm_eval_backward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                                      const BasicTensor<T>&, const BasicTensor<T>&,                \
                                                      const BasicTensor<T>&, double);                              \
  template BasicTensor<T> leaky_relu_forward(const BasicTensor<T>&, T);                                            \
  template BasicTensor<T> leaky_relu_backward(const BasicTensor<T>&, const BasicTensor<T>&, T);                    \
  template BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>&);                              \
  template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::size_t, std::size_t);                         \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                       \
  template void add_inplace(BasicTensor<T>&, const BasicTensor<T>&);                                               \
  template BasicTensor<T> crop_center(const BasicTensor<T>&, std::size_t, std::size_t);                            \
  template BasicTensor<T> uncrop_center(const BasicTensor<T>&, const Shape&);                                      \
  template double mse(const BasicTensor<T>&, const BasicTensor<T>&);

LFDEOCC_INSTANTIATE(float)
LFDEOCC_INSTANTIATE(double)

#undef LFDEOCC_INSTANTIATE

}  // namespace lfdeocc::nn::kernels
