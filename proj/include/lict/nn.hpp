#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lict/autograd.hpp"
#include "lict/rng.hpp"

namespace lict::nn {

using ag::Var;

// ----- functional ops -----

// x: [N,C,H,W], w: [F,C,kh,kw], b: [F] (may be null). OH = (H+2p-k)/s + 1.
Var conv2d(Var x, Var w, Var b, long stride, long pad);

// x: [N,C,H,W], w: [C,F,kh,kw], b: [F]. OH = (H-1)*s - 2p + k.
Var conv_transpose2d(Var x, Var w, Var b, long stride, long pad);

// Non-overlapping k x k mean pooling; H and W must be multiples of k.
Var avg_pool(Var x, long k);

// [N,C,H,W] -> [N,C]
Var global_avg_pool(Var x);

// x: [N,K], w: [K,M], b: [M] or null.
Var linear(Var x, Var w, Var b);

// Mean per-pixel cross entropy of logits [N,C,H,W] against integer labels
// (row-major N*H*W, each in [0,C)).
Var ce_map(Var logits, const std::vector<long>& labels);

// ----- layers -----

struct ParamDict {
  std::vector<std::pair<std::string, Var>> items;
  void add(const std::string& name, const Var& v) { items.emplace_back(name, v); }
  void merge(const std::string& prefix, const ParamDict& other) {
    for (const auto& [n, v] : other.items) items.emplace_back(prefix + "." + n, v);
  }
  std::vector<Var> vars() const {
    std::vector<Var> out;
    out.reserve(items.size());
    for (const auto& [n, v] : items) out.push_back(v);
    return out;
  }
};

struct Conv2d {
  Var w, b;
  long stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(long cin, long cout, long k, long stride, long pad, Rng& rng);
  Var operator()(Var x) const { return conv2d(std::move(x), w, b, stride, pad); }
  ParamDict params(const std::string& name) const;
};

struct ConvT2d {
  Var w, b;
  long stride = 1, pad = 0;
  ConvT2d() = default;
  ConvT2d(long cin, long cout, long k, long stride, long pad, Rng& rng);
  Var operator()(Var x) const { return conv_transpose2d(std::move(x), w, b, stride, pad); }
  ParamDict params(const std::string& name) const;
};

struct Linear {
  Var w, b;
  Linear() = default;
  Linear(long in, long out, Rng& rng);
  Var operator()(Var x) const { return linear(std::move(x), w, b); }
  ParamDict params(const std::string& name) const;
};

// ----- optimizer -----

class Adam {
 public:
  Adam(std::vector<Var> params, double lr);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step();
  void zero_grad();

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace lict::nn
