#pragma once

#include <vector>

#include "lfdeocc/nn/autograd.hpp"

namespace lfdeocc::nn {

using kernels::ConvGeometry;

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Running statistics of a batch-norm layer. Freshly constructed stats are
/// mean 0 / variance 1, which is what eval mode uses before any training.
template <class T>
struct BatchNormStats {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double eps = kBatchNormEps;
  double momentum = kBatchNormMomentum;

  BatchNormStats() = default;
  explicit BatchNormStats(std::size_t channels)
      : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

/// bias may be an undefined Var.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeometry& g);

/// Weights (in, out, k, k); see kernels::ConvGeometry.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeometry& g);

/// Train mode normalizes with batch statistics and updates stats; eval mode
/// uses the running statistics.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats, Mode mode);

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.1));

/// Channel concatenation of NCHW tensors.
template <class T>
Var<T> concat(const std::vector<Var<T>>& xs);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> crop_center(const Var<T>& x, std::size_t height, std::size_t width);

/// Mean squared error as a single-element tensor.
template <class T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target);

}  // namespace lfdeocc::nn
