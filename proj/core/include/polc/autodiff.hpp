#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "polc/tensor.hpp"

namespace polc {

// Reverse-mode autodiff over a dynamically built tape. A Node owns its forward
// value; gradients are allocated lazily during backward(). Graphs are built per
// loss evaluation and dropped afterwards; leaves (parameters) persist.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // valid iff grad_live
  bool requires_grad = false;
  bool grad_live = false;
  std::vector<Var> parents;
  // Accumulates d(loss)/d(parent) into each parent, reading this->grad.
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (!grad_live) {
      grad = Tensor(value.shape());
      grad_live = true;
    }
  }
  void drop_grad() {
    grad = Tensor();
    grad_live = false;
  }
};

// Leaf holding a (copied) tensor. requires_grad marks it trainable.
Var make_leaf(Tensor value, bool requires_grad = false);

// New leaf sharing no graph history with x (value copied).
Var detach(const Var& x);

// Runs reverse accumulation from a scalar root (size-1 tensor). Leaf nodes
// with requires_grad keep their grads; interior grads are freed as soon as
// consumed. Repeated backward calls accumulate into leaf grads.
void backward(const Var& root);

// Gradient helper for finite-difference harnesses: d(root)/d(leaf), zeroing
// leaf grads first.
Tensor grad_of(const Var& root, const Var& leaf);

namespace detail {
// Registers an op result. requires_grad is inferred from parents.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);
}  // namespace detail

}  // namespace polc
