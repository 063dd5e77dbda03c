#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

// Minimal reverse-mode differentiation over dense vectors.
//
// A Var is a shared node in a dynamically built graph. When gradient
// recording is off (NoGradGuard) nodes keep only their value, so states held
// by beam cells cost nothing beyond the vectors themselves.
namespace cag::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Vec value;
  Vec grad;  // sized lazily during backward
  std::vector<Var> inputs;
  std::function<void(Node&)> backward;

  double scalar() const { return value(0); }
  // Adds g into this node's gradient.
  void accumulate(const Vec& g);
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Leaf with no gradient.
Var constant(Vec value);

// Creates an interior node. `backward` is dropped when recording is off.
Var make_node(Vec value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Runs backpropagation from a scalar root (seeded with d root = 1).
void backward(const Var& root);

}  // namespace cag::nn
