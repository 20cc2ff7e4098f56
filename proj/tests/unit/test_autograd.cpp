#include <doctest.h>

#include <cmath>
#include <functional>

#include "lict/autograd.hpp"
#include "lict/nn.hpp"
#include "lict/rng.hpp"

using namespace lict;
using ag::Var;

namespace {

Tensor rand_t(std::vector<long> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Reduce an arbitrary output to a scalar with fixed weights so every output
// element contributes to the checked gradient. Seeded per call site so the
// checked function is pure across finite-difference probes.
Var weighted(Var out, uint64_t seed = 99) {
  Rng rng(seed);
  Tensor w(out->v.shape());
  for (long i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.2, 1.0);
  return ag::dot(std::move(out), ag::constant(std::move(w)));
}

void check_grad(const std::function<Var(Var)>& f, const Tensor& x0, double tol = 2e-6,
                double h = 1e-5) {
  Var p = ag::parameter(x0);
  Var loss = f(p);
  REQUIRE(loss->v.numel() == 1);
  ag::backward(loss);
  Tensor analytic = p->g;

  Tensor fd = ag::finite_diff(
      [&](const Tensor& t) {
        Var c = ag::parameter(t);
        return f(c)->v.item();
      },
      x0, h);

  for (long i = 0; i < x0.numel(); ++i) {
    const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(fd[i])});
    INFO("index " << i << " analytic " << analytic[i] << " fd " << fd[i]);
    CHECK(std::fabs(analytic[i] - fd[i]) / denom < tol);
  }
}

}  // namespace

TEST_CASE("gradients: elementwise unary ops") {
  Rng rng(21);
  Tensor x = rand_t({2, 5}, rng, 0.2, 1.5);
  auto w = [](Var v) { return weighted(std::move(v)); };

  check_grad([&](Var p) { return w(ag::exp_(p)); }, x);
  check_grad([&](Var p) { return w(ag::log_(p)); }, x);
  check_grad([&](Var p) { return w(ag::sqrt_(p)); }, x);
  check_grad([&](Var p) { return w(ag::square(p)); }, x);
  check_grad([&](Var p) { return w(ag::sigmoid(p)); }, x);
  check_grad([&](Var p) { return w(ag::tanh_(p)); }, x);
  check_grad([&](Var p) { return w(ag::softplus(p)); }, x);
  check_grad([&](Var p) { return w(ag::erf_(p)); }, x);
  check_grad([&](Var p) { return w(ag::leaky_relu(p, 0.1)); }, x);
  check_grad([&](Var p) { return w(ag::scale(p, -2.5)); }, x);
  check_grad([&](Var p) { return w(ag::offset(p, 0.7)); }, x);

  Tensor y = rand_t({2, 5}, rng, -2.0, 2.0);
  check_grad([&](Var p) { return w(ag::abs_(p)); }, y);
  check_grad([&](Var p) { return w(ag::clamp(p, -0.5, 0.9)); }, y);
  check_grad([&](Var p) { return w(ag::clamp_min(p, 0.1)); }, y);
}

TEST_CASE("gradients: binary ops with broadcasting") {
  Rng rng(22);
  Tensor a = rand_t({3, 4}, rng, 0.5, 1.5);
  Tensor b = rand_t({3, 4}, rng, 0.5, 1.5);
  Tensor col = rand_t({3, 1}, rng, 0.5, 1.5);
  Tensor scalar = rand_t({}, rng, 0.5, 1.5);
  auto w = [](Var v) { return weighted(std::move(v)); };

  for (auto op : {ag::add, ag::sub, ag::mul, ag::div}) {
    check_grad([&](Var p) { return w(op(p, ag::constant(b))); }, a);
    check_grad([&](Var p) { return w(op(ag::constant(a), p)); }, b);
    check_grad([&](Var p) { return w(op(ag::constant(a), p)); }, col);
    check_grad([&](Var p) { return w(op(p, ag::constant(col))); }, a);
    check_grad([&](Var p) { return w(op(ag::constant(a), p)); }, scalar);
  }

  // vmax with well-separated branches (gradient only through the larger)
  Tensor lo = rand_t({3, 4}, rng, 0.0, 0.4);
  Tensor hi = rand_t({3, 4}, rng, 0.6, 1.0);
  check_grad([&](Var p) { return w(ag::vmax(p, ag::constant(lo))); }, hi);
  check_grad([&](Var p) { return w(ag::vmax(ag::constant(hi), p)); }, lo);
}

TEST_CASE("gradients: reductions, reshape, permute, stack") {
  Rng rng(23);
  Tensor x = rand_t({2, 3, 4}, rng);
  auto w = [](Var v) { return weighted(std::move(v)); };

  check_grad([&](Var p) { return ag::sum(p); }, x);
  check_grad([&](Var p) { return ag::mean(p); }, x);
  check_grad([&](Var p) { return w(ag::reshape(p, {6, 4})); }, x);
  check_grad([&](Var p) { return w(ag::permute(p, {2, 0, 1})); }, x);
  check_grad(
      [&](Var p) {
        std::vector<Var> parts{p, ag::constant(x)};
        return w(ag::stack0(parts));
      },
      x);
}

TEST_CASE("gradients: matmul and bmm") {
  Rng rng(24);
  Tensor a = rand_t({3, 4}, rng);
  Tensor b = rand_t({4, 5}, rng);
  auto w = [](Var v) { return weighted(std::move(v)); };
  check_grad([&](Var p) { return w(ag::matmul(p, ag::constant(b))); }, a);
  check_grad([&](Var p) { return w(ag::matmul(ag::constant(a), p)); }, b);

  Tensor ba = rand_t({2, 3, 4}, rng);
  Tensor bb = rand_t({2, 4, 5}, rng);
  check_grad([&](Var p) { return w(ag::bmm(p, ag::constant(bb))); }, ba);
  check_grad([&](Var p) { return w(ag::bmm(ag::constant(ba), p)); }, bb);
}

TEST_CASE("gradients: conv2d and conv_transpose2d") {
  Rng rng(25);
  Tensor x = rand_t({2, 3, 6, 6}, rng);
  Tensor wt = rand_t({4, 3, 3, 3}, rng);
  Tensor bias = rand_t({4}, rng);
  auto w = [](Var v) { return weighted(std::move(v)); };

  auto conv = [&](Var xx, Var ww, Var bb) { return nn::conv2d(xx, ww, bb, 2, 1); };
  check_grad([&](Var p) { return w(conv(p, ag::constant(wt), ag::constant(bias))); }, x);
  check_grad([&](Var p) { return w(conv(ag::constant(x), p, ag::constant(bias))); }, wt);
  check_grad([&](Var p) { return w(conv(ag::constant(x), ag::constant(wt), p)); }, bias);

  Tensor xt = rand_t({2, 3, 4, 4}, rng);
  Tensor wtt = rand_t({3, 4, 4, 4}, rng);
  auto convt = [&](Var xx, Var ww, Var bb) { return nn::conv_transpose2d(xx, ww, bb, 2, 1); };
  check_grad([&](Var p) { return w(convt(p, ag::constant(wtt), ag::constant(bias))); }, xt);
  check_grad([&](Var p) { return w(convt(ag::constant(xt), p, ag::constant(bias))); }, wtt);
  check_grad([&](Var p) { return w(convt(ag::constant(xt), ag::constant(wtt), p)); }, bias);
}

TEST_CASE("gradients: pooling, linear, cosine, ce_map") {
  Rng rng(26);
  auto w = [](Var v) { return weighted(std::move(v)); };

  Tensor x = rand_t({2, 3, 4, 4}, rng);
  check_grad([&](Var p) { return w(nn::avg_pool(p, 2)); }, x);
  check_grad([&](Var p) { return w(nn::global_avg_pool(p)); }, x);

  Tensor xin = rand_t({3, 4}, rng);
  Tensor wl = rand_t({4, 2}, rng);
  Tensor bl = rand_t({2}, rng);
  check_grad([&](Var p) { return w(nn::linear(p, ag::constant(wl), ag::constant(bl))); }, xin);
  check_grad([&](Var p) { return w(nn::linear(ag::constant(xin), p, ag::constant(bl))); }, wl);

  Tensor ea = rand_t({8}, rng);
  Tensor eb = rand_t({8}, rng);
  check_grad([&](Var p) { return ag::cosine(p, ag::constant(eb)); }, ea);
  check_grad([&](Var p) { return ag::mse(p, ag::constant(eb)); }, ea);

  Tensor logits = rand_t({2, 4, 3, 3}, rng);
  std::vector<long> labels(2 * 3 * 3);
  Rng lr(27);
  for (auto& l : labels) l = lr.index(4);
  check_grad([&](Var p) { return nn::ce_map(p, labels); }, logits, 5e-6);
}

TEST_CASE("backward accumulates across reuse and respects constants") {
  Rng rng(28);
  Tensor x0 = rand_t({4}, rng, 0.5, 1.0);
  // f = sum(x*x + 3x) -> grad 2x + 3
  Var p = ag::parameter(x0);
  Var loss = ag::sum(ag::add(ag::mul(p, p), ag::scale(p, 3.0)));
  ag::backward(loss);
  for (long i = 0; i < 4; ++i)
    CHECK(p->g[i] == doctest::Approx(2.0 * x0[i] + 3.0).epsilon(1e-12));

  Var c = ag::constant(x0);
  Var loss2 = ag::sum(ag::mul(c, c));
  CHECK_FALSE(loss2->rg);
  ag::backward(loss2);  // no-op, must not throw
}

TEST_CASE("adam steps deterministically and reduces a quadratic") {
  Tensor x0({8}, 5.0);
  Var p = ag::parameter(x0);
  nn::Adam opt({p}, 0.1);
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    Var loss = ag::sum(ag::square(p));
    ag::backward(loss);
    opt.step();
  }
  for (long i = 0; i < 8; ++i) CHECK(std::fabs(p->v[i]) < 0.5);
}
