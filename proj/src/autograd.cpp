#include "lict/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "lict/kernels/kernels.hpp"

namespace lict::ag {

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->v = std::move(value);
  return n;
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->v = std::move(value);
  n->rg = true;
  return n;
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->v = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p && p->rg) n->rg = true;
  if (n->rg) n->bw = std::move(backward);
  return n;
}

void backward(const Var& root) {
  if (!root) throw std::invalid_argument("backward: null root");
  if (root->v.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root->rg) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p && p->rg && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->bw) (*it)->bw(**it);
}

// ---------------------------------------------------------------------------
// broadcasting helpers

namespace {

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

std::vector<long> bcast_shape(const Tensor& a, const Tensor& b) {
  if (is_scalar(a)) return b.shape();
  if (is_scalar(b)) return a.shape();
  if (a.ndim() != b.ndim())
    throw std::invalid_argument("broadcast: rank mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  std::vector<long> out(a.ndim());
  for (long d = 0; d < a.ndim(); ++d) {
    const long x = a.extent(d), y = b.extent(d);
    if (x == y)
      out[d] = x;
    else if (x == 1 || y == 1)
      out[d] = std::max(x, y);
    else
      throw std::invalid_argument("broadcast: incompatible shapes " + a.shape_str() + " vs " +
                                  b.shape_str());
  }
  return out;
}

std::vector<long> strides_for(const std::vector<long>& shape, const std::vector<long>& out) {
  // stride 0 on broadcast dims; scalar broadcasts across everything
  std::vector<long> st(out.size(), 0);
  if (numel_of(shape) == 1 && shape.size() != out.size()) return st;
  long acc = 1;
  for (long d = (long)shape.size() - 1; d >= 0; --d) {
    st[d] = shape[d] == 1 ? 0 : acc;
    acc *= shape[d];
  }
  return st;
}

template <typename F>
void bcast_apply(const Tensor& a, const Tensor& b, Tensor& out, F&& f) {
  const auto& os = out.shape();
  const auto sa = strides_for(a.shape(), os);
  const auto sb = strides_for(b.shape(), os);
  const long n = out.numel();
  const long nd = out.ndim();
  std::vector<long> coord(nd, 0);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  long ia = 0, ib = 0;
  for (long i = 0; i < n; ++i) {
    po[i] = f(pa[ia], pb[ib]);
    for (long d = nd - 1; d >= 0; --d) {
      ++coord[d];
      ia += sa[d];
      ib += sb[d];
      if (coord[d] < os[d]) break;
      coord[d] = 0;
      ia -= sa[d] * os[d];
      ib -= sb[d] * os[d];
    }
  }
}

// Sum `g` (shaped like out) down to `shape` (a broadcast input's shape).
Tensor reduce_to(const Tensor& g, const std::vector<long>& shape) {
  if (g.shape() == shape) return g;
  Tensor r(shape);
  const auto st = strides_for(shape, g.shape());
  const long n = g.numel();
  const long nd = g.ndim();
  std::vector<long> coord(nd, 0);
  const double* pg = g.data();
  double* pr = r.data();
  long ir = 0;
  for (long i = 0; i < n; ++i) {
    pr[ir] += pg[i];
    for (long d = nd - 1; d >= 0; --d) {
      ++coord[d];
      ir += st[d];
      if (coord[d] < g.shape()[d]) break;
      coord[d] = 0;
      ir -= st[d] * g.shape()[d];
    }
  }
  return r;
}

void accumulate(Tensor& dst, const Tensor& src) {
  kernels::ops().axpy(1.0, src.data(), dst.data(), dst.numel());
}

using UnaryFwd = double (*)(double);

Var unary_op(Var a, UnaryFwd f, std::function<double(double x, double y)> dydx) {
  Tensor out(a->v.shape());
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out[i] = f(a->v[i]);
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, dydx](Node& self) {
    if (!pa->rg) return;
    Tensor& pg = pa->grad();
    const long n = self.v.numel();
    for (long i = 0; i < n; ++i) pg[i] += self.g[i] * dydx(pa->v[i], self.v[i]);
  });
}

enum class BinKind { Add, Sub, Mul, Div, Max };

Var binary_op(Var a, Var b, BinKind kind) {
  Tensor out(bcast_shape(a->v, b->v));
  const bool same = a->v.same_shape(b->v) && a->v.shape() == out.shape();
  const auto& k = kernels::ops();
  switch (kind) {
    case BinKind::Add:
      if (same)
        k.vadd(a->v.data(), b->v.data(), out.data(), out.numel());
      else
        bcast_apply(a->v, b->v, out, [](double x, double y) { return x + y; });
      break;
    case BinKind::Sub:
      if (same)
        k.vsub(a->v.data(), b->v.data(), out.data(), out.numel());
      else
        bcast_apply(a->v, b->v, out, [](double x, double y) { return x - y; });
      break;
    case BinKind::Mul:
      if (same)
        k.vmul(a->v.data(), b->v.data(), out.data(), out.numel());
      else
        bcast_apply(a->v, b->v, out, [](double x, double y) { return x * y; });
      break;
    case BinKind::Div:
      bcast_apply(a->v, b->v, out, [](double x, double y) { return x / y; });
      break;
    case BinKind::Max:
      bcast_apply(a->v, b->v, out, [](double x, double y) { return x >= y ? x : y; });
      break;
  }
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb, kind](Node& self) {
    const Tensor& g = self.g;
    auto push = [&](const Var& p, const Tensor& local) {
      accumulate(p->grad(), reduce_to(local, p->v.shape()));
    };
    switch (kind) {
      case BinKind::Add:
        if (pa->rg) push(pa, g);
        if (pb->rg) push(pb, g);
        break;
      case BinKind::Sub: {
        if (pa->rg) push(pa, g);
        if (pb->rg) {
          Tensor ng(g.shape());
          kernels::ops().vscale(g.data(), -1.0, ng.data(), g.numel());
          push(pb, ng);
        }
        break;
      }
      case BinKind::Mul: {
        if (pa->rg) {
          Tensor t(g.shape());
          bcast_apply(g, pb->v, t, [](double x, double y) { return x * y; });
          push(pa, t);
        }
        if (pb->rg) {
          Tensor t(g.shape());
          bcast_apply(g, pa->v, t, [](double x, double y) { return x * y; });
          push(pb, t);
        }
        break;
      }
      case BinKind::Div: {
        if (pa->rg) {
          Tensor t(g.shape());
          bcast_apply(g, pb->v, t, [](double x, double y) { return x / y; });
          push(pa, t);
        }
        if (pb->rg) {
          // d(a/b)/db = -a/b^2
          Tensor ab(self.v.shape());
          bcast_apply(pa->v, pb->v, ab, [](double x, double y) { return -x / (y * y); });
          Tensor t(g.shape());
          bcast_apply(g, ab, t, [](double x, double y) { return x * y; });
          push(pb, t);
        }
        break;
      }
      case BinKind::Max: {
        Tensor mask_a(self.v.shape());
        bcast_apply(pa->v, pb->v, mask_a, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
        if (pa->rg) {
          Tensor t(g.shape());
          bcast_apply(g, mask_a, t, [](double x, double y) { return x * y; });
          push(pa, t);
        }
        if (pb->rg) {
          Tensor t(g.shape());
          bcast_apply(g, mask_a, t, [](double x, double y) { return x * (1.0 - y); });
          push(pb, t);
        }
        break;
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Var neg(Var a) { return scale(std::move(a), -1.0); }

Var exp_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Var log_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Var sqrt_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Var abs_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::fabs(x); },
                  [](double x, double) { return x >= 0.0 ? 1.0 : -1.0; });
}

Var square(Var a) {
  return unary_op(std::move(a), [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Var sigmoid(Var a) {
  return unary_op(std::move(a), [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Var tanh_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
  return unary_op(std::move(a),
                  [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                  [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var erf_(Var a) {
  return unary_op(std::move(a), [](double x) { return std::erf(x); },
                  [](double x, double) { return 1.1283791670955126 * std::exp(-x * x); });
}

Var leaky_relu(Var a, double slope) {
  Tensor out(a->v.shape());
  kernels::ops().leaky_relu_fwd(a->v.data(), slope, out.data(), out.numel());
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, slope](Node& self) {
    if (!pa->rg) return;
    kernels::ops().leaky_relu_bwd(pa->v.data(), self.g.data(), slope, pa->grad().data(),
                                  self.v.numel());
  });
}

Var clamp(Var a, double lo, double hi) {
  Tensor out(a->v.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, a->v[i]));
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, lo, hi](Node& self) {
    if (!pa->rg) return;
    Tensor& pg = pa->grad();
    for (long i = 0; i < self.v.numel(); ++i)
      if (pa->v[i] >= lo && pa->v[i] <= hi) pg[i] += self.g[i];
  });
}

Var clamp_min(Var a, double lo) {
  Tensor out(a->v.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = std::max(lo, a->v[i]);
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, lo](Node& self) {
    if (!pa->rg) return;
    Tensor& pg = pa->grad();
    for (long i = 0; i < self.v.numel(); ++i)
      if (pa->v[i] >= lo) pg[i] += self.g[i];
  });
}

Var scale(Var a, double s) {
  Tensor out(a->v.shape());
  kernels::ops().vscale(a->v.data(), s, out.data(), out.numel());
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, s](Node& self) {
    if (!pa->rg) return;
    kernels::ops().axpy(s, self.g.data(), pa->grad().data(), self.v.numel());
  });
}

Var offset(Var a, double c) {
  Tensor out(a->v.shape());
  for (long i = 0; i < out.numel(); ++i) out[i] = a->v[i] + c;
  Var pa = a;
  return make_node(std::move(out), {a}, [pa](Node& self) {
    if (!pa->rg) return;
    accumulate(pa->grad(), self.g);
  });
}

// ---------------------------------------------------------------------------
// binary

Var add(Var a, Var b) { return binary_op(std::move(a), std::move(b), BinKind::Add); }
Var sub(Var a, Var b) { return binary_op(std::move(a), std::move(b), BinKind::Sub); }
Var mul(Var a, Var b) { return binary_op(std::move(a), std::move(b), BinKind::Mul); }
Var div(Var a, Var b) { return binary_op(std::move(a), std::move(b), BinKind::Div); }
Var vmax(Var a, Var b) { return binary_op(std::move(a), std::move(b), BinKind::Max); }

// ---------------------------------------------------------------------------
// reductions / shape

Var sum(Var a) {
  Tensor out = Tensor::scalar(kernels::ops().vsum(a->v.data(), a->v.numel()));
  Var pa = a;
  return make_node(std::move(out), {a}, [pa](Node& self) {
    if (!pa->rg) return;
    const double g = self.g[0];
    Tensor& pg = pa->grad();
    for (long i = 0; i < pg.numel(); ++i) pg[i] += g;
  });
}

Var mean(Var a) {
  const long n = a->v.numel();
  return scale(sum(std::move(a)), 1.0 / (double)n);
}

Var reshape(Var a, std::vector<long> shape) {
  Tensor out = a->v.reshaped(std::move(shape));
  Var pa = a;
  return make_node(std::move(out), {a}, [pa](Node& self) {
    if (!pa->rg) return;
    accumulate(pa->grad(), self.g.reshaped(pa->v.shape()));
  });
}

Var permute(Var a, std::vector<long> axes) {
  const long nd = a->v.ndim();
  if ((long)axes.size() != nd) throw std::invalid_argument("permute: bad axes");
  std::vector<long> oshape(nd);
  for (long d = 0; d < nd; ++d) oshape[d] = a->v.extent(axes[d]);
  // strides of input
  std::vector<long> istr(nd, 1);
  for (long d = nd - 2; d >= 0; --d) istr[d] = istr[d + 1] * a->v.extent(d + 1);
  std::vector<long> pstr(nd);
  for (long d = 0; d < nd; ++d) pstr[d] = istr[axes[d]];
  Tensor out(oshape);
  std::vector<long> coord(nd, 0);
  const double* src = a->v.data();
  long isrc = 0;
  for (long i = 0; i < out.numel(); ++i) {
    out[i] = src[isrc];
    for (long d = nd - 1; d >= 0; --d) {
      ++coord[d];
      isrc += pstr[d];
      if (coord[d] < oshape[d]) break;
      coord[d] = 0;
      isrc -= pstr[d] * oshape[d];
    }
  }
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, oshape, pstr, nd](Node& self) {
    if (!pa->rg) return;
    Tensor& pg = pa->grad();
    std::vector<long> coord(nd, 0);
    long isrc = 0;
    for (long i = 0; i < self.v.numel(); ++i) {
      pg[isrc] += self.g[i];
      for (long d = nd - 1; d >= 0; --d) {
        ++coord[d];
        isrc += pstr[d];
        if (coord[d] < oshape[d]) break;
        coord[d] = 0;
        isrc -= pstr[d] * oshape[d];
      }
    }
  });
}

Var stack0(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack0: empty");
  const auto base = parts[0]->v.shape();
  for (const auto& p : parts)
    if (p->v.shape() != base) throw std::invalid_argument("stack0: shape mismatch");
  std::vector<long> oshape;
  oshape.push_back((long)parts.size());
  oshape.insert(oshape.end(), base.begin(), base.end());
  Tensor out(oshape);
  const long stride = numel_of(base);
  for (size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i]->v.data(), parts[i]->v.data() + stride, out.data() + i * stride);
  std::vector<Var> ps(parts.begin(), parts.end());
  return make_node(std::move(out), ps, [ps, stride](Node& self) {
    for (size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i]->rg) continue;
      kernels::ops().axpy(1.0, self.g.data() + i * stride, ps[i]->grad().data(), stride);
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(Var a, Var b) {
  if (a->v.ndim() != 2 || b->v.ndim() != 2 || a->v.extent(1) != b->v.extent(0))
    throw std::invalid_argument("matmul: shape mismatch");
  const long m = a->v.extent(0), kk = a->v.extent(1), n = b->v.extent(1);
  Tensor out({m, n});
  kernels::ops().gemm(a->v.data(), b->v.data(), out.data(), m, n, kk, false);
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb, m, n, kk](Node& self) {
    const auto& k = kernels::ops();
    if (pa->rg) k.gemm_nt(self.g.data(), pb->v.data(), pa->grad().data(), m, kk, n, true);
    if (pb->rg) k.gemm_tn(pa->v.data(), self.g.data(), pb->grad().data(), kk, n, m, true);
  });
}

Var bmm(Var a, Var b) {
  if (a->v.ndim() != 3 || b->v.ndim() != 3 || a->v.extent(0) != b->v.extent(0) ||
      a->v.extent(2) != b->v.extent(1))
    throw std::invalid_argument("bmm: shape mismatch");
  const long bs = a->v.extent(0), m = a->v.extent(1), kk = a->v.extent(2), n = b->v.extent(2);
  Tensor out({bs, m, n});
  const auto& k = kernels::ops();
  for (long i = 0; i < bs; ++i)
    k.gemm(a->v.data() + i * m * kk, b->v.data() + i * kk * n, out.data() + i * m * n, m, n, kk,
           false);
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb, bs, m, n, kk](Node& self) {
    const auto& k = kernels::ops();
    for (long i = 0; i < bs; ++i) {
      const double* g = self.g.data() + i * m * n;
      if (pa->rg)
        k.gemm_nt(g, pb->v.data() + i * kk * n, pa->grad().data() + i * m * kk, m, kk, n, true);
      if (pb->rg)
        k.gemm_tn(pa->v.data() + i * m * kk, g, pb->grad().data() + i * kk * n, kk, n, m, true);
    }
  });
}

// ---------------------------------------------------------------------------
// convenience

Var mse(Var a, Var b) { return mean(square(sub(std::move(a), std::move(b)))); }

Var dot(Var a, Var b) { return sum(mul(std::move(a), std::move(b))); }

Var cosine(Var a, Var b) {
  Var num = dot(a, b);
  Var den = sqrt_(clamp_min(mul(dot(a, a), dot(b, b)), 1e-24));
  return div(std::move(num), std::move(den));
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (long i = 0; i < x.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace lict::ag
