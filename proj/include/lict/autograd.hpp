#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lict/tensor.hpp"

namespace lict::ag {

struct Node;
using Var = std::shared_ptr<Node>;

// One value in a dynamically built tape. Backward functions read this node's
// gradient and accumulate into the parents' gradients.
struct Node {
  Tensor v;
  Tensor g;
  bool rg = false;  // does any ancestor require gradients
  std::vector<Var> parents;
  std::function<void(Node&)> bw;

  Tensor& grad() {
    if (g.numel() != v.numel() || !g.same_shape(v)) g = Tensor::zeros(v.shape());
    return g;
  }

  bool has_grad() const { return g.numel() == v.numel() && g.same_shape(v); }
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Generic custom-op hook: `backward` must accumulate into parents' grad().
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar root (seeds d(root)/d(root) = 1).
void backward(const Var& root);

// ----- elementwise -----
Var neg(Var a);
Var exp_(Var a);
Var log_(Var a);
Var sqrt_(Var a);
Var abs_(Var a);
Var square(Var a);
Var sigmoid(Var a);
Var tanh_(Var a);
Var softplus(Var a);
Var erf_(Var a);
Var leaky_relu(Var a, double slope);
inline Var relu(Var a) { return leaky_relu(std::move(a), 0.0); }
// Hard clamp; gradient passes through on the closed interval [lo,hi].
Var clamp(Var a, double lo, double hi);
Var clamp_min(Var a, double lo);
Var scale(Var a, double s);
Var offset(Var a, double c);

// ----- binary (same rank with broadcastable extents, or scalar on either side) -----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// Elementwise max; gradient follows the larger branch (ties go to `a`).
Var vmax(Var a, Var b);

// ----- reductions / shape -----
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, std::vector<long> shape);
Var permute(Var a, std::vector<long> axes);
Var stack0(const std::vector<Var>& parts);  // new leading axis

// ----- linear algebra -----
Var matmul(Var a, Var b);                   // [M,K] x [K,N]
Var bmm(Var a, Var b);                      // [B,M,K] x [B,K,N]

// ----- convenience -----
Var mse(Var a, Var b);                      // mean squared difference
Var dot(Var a, Var b);                      // sum(a*b), any matching shape
Var cosine(Var a, Var b);                   // dot/(|a||b|), eps-guarded

// Finite-difference gradient of f at x (central differences), for tests and
// the oracle checks. f must be a pure function of the tensor argument.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double h = 1e-5);

}  // namespace lict::ag
