#pragma once

#include <cstddef>
#include <vector>

#include "lfdeocc/nn/tensor.hpp"

// Raw forward/backward routines on NCHW tensors. Reductions accumulate in
// double in a fixed order, so results do not depend on anything but inputs.
namespace lfdeocc::nn::kernels {

/// Square-kernel 2D convolution geometry. For a transposed convolution
/// in/out refer to the transposed operator itself and weights are laid out
/// (in, out, k, k); for a regular convolution weights are (out, in, k, k).
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;  // transposed convolution only

  std::size_t extent() const { return dilation * (kernel - 1) + 1; }
  /// Regular convolution output size along one axis; 0 if the input is too small.
  std::size_t output_size(std::size_t in) const;
  std::size_t transpose_output_size(std::size_t in) const;
  Shape weight_shape() const { return {out_channels, in_channels, kernel, kernel}; }
  Shape transpose_weight_shape() const { return {in_channels, out_channels, kernel, kernel}; }
  std::size_t parameter_count(bool bias = true) const {
    return in_channels * out_channels * kernel * kernel + (bias ? out_channels : 0);
  }
};

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>* bias,
                              const ConvGeometry& g);
/// Gradient w.r.t. the input of conv2d_forward, for an input of in_h x in_w.
template <class T>
BasicTensor<T> conv2d_grad_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weight, const ConvGeometry& g,
                                 std::size_t in_h, std::size_t in_w);
template <class T>
BasicTensor<T> conv2d_grad_weight(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, const ConvGeometry& g);
/// Sum over batch and spatial positions per channel.
template <class T>
BasicTensor<T> channel_sum(const BasicTensor<T>& grad_out);

template <class T>
BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                                        const BasicTensor<T>* bias, const ConvGeometry& g);
template <class T>
BasicTensor<T> conv_transpose2d_grad_input(const BasicTensor<T>& grad_out, const BasicTensor<T>& weight,
                                           const ConvGeometry& g);
template <class T>
BasicTensor<T> conv_transpose2d_grad_weight(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                            const ConvGeometry& g);

template <class T>
struct BatchNormSaved {
  std::vector<double> mean;
  std::vector<double> var;     // biased
  std::vector<double> invstd;  // 1 / sqrt(var + eps)
  BasicTensor<T> normalized;   // (x - mean) * invstd
};

template <class T>
BasicTensor<T> batch_norm_train_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                        const BasicTensor<T>& beta, double eps, BatchNormSaved<T>& saved);
template <class T>
BasicTensor<T> batch_norm_eval_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                       const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                       double eps);

template <class T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <class T>
BatchNormGrads<T> batch_norm_train_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& gamma,
                                            const BatchNormSaved<T>& saved);
template <class T>
BatchNormGrads<T> batch_norm_eval_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x,
                                           const BasicTensor<T>& gamma, const BasicTensor<T>& running_mean,
                                           const BasicTensor<T>& running_var, double eps);

template <class T>
BasicTensor<T> leaky_relu_forward(const BasicTensor<T>& x, T slope);
template <class T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& x, T slope);

/// Concatenation along the channel axis of rank-4 tensors.
template <class T>
BasicTensor<T> concat_channels(const std::vector<const BasicTensor<T>*>& xs);
/// Channels [first, first + count) of x.
template <class T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t first, std::size_t count);

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
void add_inplace(BasicTensor<T>& acc, const BasicTensor<T>& b);

/// Centered spatial crop of a rank-4 tensor to h x w, and its adjoint.
template <class T>
BasicTensor<T> crop_center(const BasicTensor<T>& x, std::size_t h, std::size_t w);
template <class T>
BasicTensor<T> uncrop_center(const BasicTensor<T>& grad_out, const Shape& input_shape);

template <class T>
double mse(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace lfdeocc::nn::kernels
