#include "polc/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>

namespace polc {

Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var detach(const Var& x) { return make_leaf(x->value, false); }

namespace detail {
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}
}  // namespace detail

namespace {
void topo_order(const Var& root, std::vector<Node*>& order) {
  // Iterative post-order DFS over the requires_grad subgraph.
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}
}  // namespace

void backward(const Var& root) {
  POLC_CHECK(root->value.size() == 1, "backward root must be scalar");
  if (!root->requires_grad) return;
  std::vector<Node*> order;
  topo_order(root, order);
  root->ensure_grad();
  root->grad[0] += 1.0;
  // order is post-order (parents before children); walk in reverse. Once a
  // node has pushed its gradient to its parents, its own grad is dead and is
  // freed immediately. Leaves (no backprop fn) keep theirs.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backprop) continue;
    if (n->grad_live) n->backprop(*n);
    n->drop_grad();
  }
}

Tensor grad_of(const Var& root, const Var& leaf) {
  leaf->drop_grad();
  backward(root);
  if (!leaf->grad_live) return Tensor(leaf->value.shape());
  return leaf->grad;
}

}  // namespace polc
