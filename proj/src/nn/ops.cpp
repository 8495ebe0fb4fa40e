#include "lfdeocc/nn/ops.hpp"

#include <cassert>

namespace lfdeocc::nn {

namespace k = kernels;

namespace {

template <class T>
void debug_check_finite([[maybe_unused]] const BasicTensor<T>& t) {
  assert(t.all_finite() && "non-finite value produced by a forward op");
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeometry& g) {
  const BasicTensor<T>* b = bias.defined() ? &bias.value() : nullptr;
  BasicTensor<T> y = k::conv2d_forward(x.value(), weight.value(), b, g);
  debug_check_finite(y);
  std::vector<Var<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Var<T>::from_op(std::move(y), std::move(parents),
                         [g](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
                           Node<T>& xn = *p[0];
                           Node<T>& wn = *p[1];
                           if (xn.requires_grad) {
                             accumulate_grad(xn, k::conv2d_grad_input(gy, wn.value, g, xn.value.dim(2),
                                                                     xn.value.dim(3)));
                           }
                           if (wn.requires_grad) accumulate_grad(wn, k::conv2d_grad_weight(gy, xn.value, g));
                           if (p.size() > 2 && p[2]->requires_grad) accumulate_grad(*p[2], k::channel_sum(gy));
                         });
}

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeometry& g) {
  const BasicTensor<T>* b = bias.defined() ? &bias.value() : nullptr;
  BasicTensor<T> y = k::conv_transpose2d_forward(x.value(), weight.value(), b, g);
  debug_check_finite(y);
  std::vector<Var<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Var<T>::from_op(std::move(y), std::move(parents),
                         [g](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
                           Node<T>& xn = *p[0];
                           Node<T>& wn = *p[1];
                           if (xn.requires_grad) accumulate_grad(xn, k::conv_transpose2d_grad_input(gy, wn.value, g));
                           if (wn.requires_grad) {
                             accumulate_grad(wn, k::conv_transpose2d_grad_weight(gy, xn.value, g));
                           }
                           if (p.size() > 2 && p[2]->requires_grad) accumulate_grad(*p[2], k::channel_sum(gy));
                         });
}

template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats, Mode mode) {
  if (x.value().rank() != 4) throw std::invalid_argument("batch_norm: expected NCHW input");
  const std::size_t channels = x.value().dim(1);
  if (stats.running_mean.empty()) stats = BatchNormStats<T>(channels);
  if (stats.running_mean.numel() != channels || stats.running_var.numel() != channels) {
    throw std::invalid_argument("batch_norm: running statistics sized for " +
                                std::to_string(stats.running_mean.numel()) + " channels, input has " +
                                std::to_string(channels));
  }
  if (mode == Mode::Eval) {
    BasicTensor<T> y = k::batch_norm_eval_forward(x.value(), gamma.value(), beta.value(), stats.running_mean,
                                                  stats.running_var, stats.eps);
    debug_check_finite(y);
    return Var<T>::from_op(std::move(y), {x, gamma, beta},
                           [mean = stats.running_mean, var = stats.running_var, eps = stats.eps](
                               const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
                             auto g = k::batch_norm_eval_backward(gy, p[0]->value, p[1]->value, mean, var, eps);
                             accumulate_grad(*p[0], std::move(g.input));
                             accumulate_grad(*p[1], std::move(g.gamma));
                             accumulate_grad(*p[2], std::move(g.beta));
                           });
  }

  auto saved = std::make_shared<k::BatchNormSaved<T>>();
  BasicTensor<T> y = k::batch_norm_train_forward(x.value(), gamma.value(), beta.value(), stats.eps, *saved);
  debug_check_finite(y);
  const double m = static_cast<double>(x.value().numel() / channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const double unbiased = m > 1.0 ? saved->var[c] * m / (m - 1.0) : saved->var[c];
    stats.running_mean[c] =
        static_cast<T>((1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * saved->mean[c]);
    stats.running_var[c] = static_cast<T>((1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * unbiased);
  }
  return Var<T>::from_op(std::move(y), {x, gamma, beta},
                         [saved](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
                           auto g = k::batch_norm_train_backward(gy, p[1]->value, *saved);
                           accumulate_grad(*p[0], std::move(g.input));
                           accumulate_grad(*p[1], std::move(g.gamma));
                           accumulate_grad(*p[2], std::move(g.beta));
                         });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  BasicTensor<T> y = k::leaky_relu_forward(x.value(), slope);
  return Var<T>::from_op(std::move(y), {x}, [slope](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
    accumulate_grad(*p[0], k::leaky_relu_backward(gy, p[0]->value, slope));
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& xs) {
  std::vector<const BasicTensor<T>*> values;
  values.reserve(xs.size());
  for (const Var<T>& x : xs) values.push_back(&x.value());
  BasicTensor<T> y = k::concat_channels(values);
  return Var<T>::from_op(std::move(y), xs, [](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
    std::size_t first = 0;
    for (const NodePtr<T>& node : p) {
      const std::size_t count = node->value.dim(1);
      if (node->requires_grad) accumulate_grad(*node, k::slice_channels(gy, first, count));
      first += count;
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  BasicTensor<T> y = k::add(a.value(), b.value());
  return Var<T>::from_op(std::move(y), {a, b}, [](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
    accumulate_grad(*p[0], gy);
    accumulate_grad(*p[1], gy);
  });
}

template <class T>
Var<T> crop_center(const Var<T>& x, std::size_t height, std::size_t width) {
  BasicTensor<T> y = k::crop_center(x.value(), height, width);
  return Var<T>::from_op(std::move(y), {x}, [](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
    accumulate_grad(*p[0], k::uncrop_center(gy, p[0]->value.shape()));
  });
}

template <class T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target) {
  const double loss = k::mse(pred.value(), target.value());
  BasicTensor<T> y(Shape{1}, static_cast<T>(loss));
  return Var<T>::from_op(std::move(y), {pred, target}, [](const BasicTensor<T>& gy, std::span<const NodePtr<T>> p) {
    const BasicTensor<T>& a = p[0]->value;
    const BasicTensor<T>& b = p[1]->value;
    const double scale = 2.0 * static_cast<double>(gy[0]) / static_cast<double>(a.numel());
    if (p[0]->requires_grad) {
      BasicTensor<T> g(a.shape());
      for (std::size_t i = 0; i < a.numel(); ++i) g[i] = static_cast<T>(scale * (static_cast<double>(a[i]) - b[i]));
      accumulate_grad(*p[0], std::move(g));
    }
    if (p[1]->requires_grad) {
      BasicTensor<T> g(a.shape());
      for (std::size_t i = 0; i < a.numel(); ++i) g[i] = static_cast<T>(scale * (static_cast<double>(b[i]) - a[i]));
      accumulate_grad(*p[1], std::move(g));
    }
  });
}

#define LFDEOCC_INSTANTIATE(T)                                                                                \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&);                  \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&);        \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormStats<T>&, Mode);         \
  template Var<T> leaky_relu(const Var<T>&, T);                                                               \
  template Var<T> concat(const std::vector<Var<T>>&);                                                         \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> crop_center(const Var<T>&, std::size_t, std::size_t);                                       \
  template Var<T> mse_loss(const Var<T>&, const Var<T>&);

LFDEOCC_INSTANTIATE(float)
LFDEOCC_INSTANTIATE(double)

#undef LFDEOCC_INSTANTIATE

}  // namespace lfdeocc::nn
