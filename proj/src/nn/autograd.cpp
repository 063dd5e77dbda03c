#include "cag/nn/autograd.hpp"

#include <unordered_set>

#include "cag/errors.hpp"

namespace cag::nn {

namespace {
thread_local bool g_record = true;
}

void Node::accumulate(const Vec& g) {
  if (grad.size() == 0)
    grad = g;
  else
    grad += g;
}

bool grad_enabled() { return g_record; }

NoGradGuard::NoGradGuard() : previous_(g_record) { g_record = false; }
NoGradGuard::~NoGradGuard() { g_record = previous_; }

Var constant(Vec value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var make_node(Vec value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_record) {
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return n;
}

void backward(const Var& root) {
  if (root->value.size() != 1) throw ContractError("backward: root must be a scalar");
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad.resize(0);
  root->grad = Vec::Ones(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

}  // namespace cag::nn
