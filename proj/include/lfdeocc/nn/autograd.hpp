#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "lfdeocc/nn/kernels.hpp"
#include "lfdeocc/nn/tensor.hpp"

namespace lfdeocc::nn {

template <class T>
struct Node;

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

/// Receives the gradient of the node's output and accumulates into parents.
template <class T>
using BackwardFn = std::function<void(const BasicTensor<T>& grad_out, std::span<const NodePtr<T>> parents)>;

template <class T>
struct Node {
  BasicTensor<T> value;
  BasicTensor<T> grad;  // empty until something flows back
  bool requires_grad = false;
  std::vector<NodePtr<T>> parents;
  BackwardFn<T> backward;
};

/// Accumulates g into node's gradient if the node takes part in
/// differentiation.
template <class T>
void accumulate_grad(Node<T>& node, BasicTensor<T> g) {
  if (!node.requires_grad) return;
  if (node.grad.empty()) {
    node.grad = std::move(g);
  } else {
    kernels::add_inplace(node.grad, g);
  }
}

/// Handle to a value in the dynamic computation graph. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;

  static Var constant(BasicTensor<T> value) { return Var(std::move(value), false); }
  static Var parameter(BasicTensor<T> value) { return Var(std::move(value), true); }

  /// Result of an operation; gradient flows only if some parent requires it.
  static Var from_op(BasicTensor<T> value, std::vector<Var> parents, BackwardFn<T> backward) {
    Var out(std::move(value), false);
    for (const Var& p : parents) out.node_->requires_grad = out.node_->requires_grad || p.requires_grad();
    if (out.node_->requires_grad) {
      out.node_->parents.reserve(parents.size());
      for (const Var& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const BasicTensor<T>& value() const { return node_->value; }
  /// Direct access for optimizers and loaders; does not touch the graph.
  BasicTensor<T>& value_mut() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  const BasicTensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() { node_->grad = BasicTensor<T>(); }
  const NodePtr<T>& node() const { return node_; }

 private:
  Var(BasicTensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  NodePtr<T> node_;
};

/// Reverse-mode sweep from root seeded with seed (same shape as root).
/// Intermediate gradients are released once propagated; leaves keep theirs.
template <class T>
void backward(const Var<T>& root, BasicTensor<T> seed) {
  if (!root.requires_grad()) return;
  if (seed.shape() != root.shape()) throw std::invalid_argument("backward: seed shape differs from root");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  accumulate_grad(*root.node(), std::move(seed));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward || node->grad.empty()) continue;
    node->backward(node->grad, node->parents);
    node->grad = BasicTensor<T>();
  }
}

/// Backward from a single-element root with seed 1.
template <class T>
void backward(const Var<T>& root) {
  if (root.value().numel() != 1) throw std::invalid_argument("backward: root must be a scalar without an explicit seed");
  backward(root, BasicTensor<T>(root.shape(), T{1}));
}

}  // namespace lfdeocc::nn
