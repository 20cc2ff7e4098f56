#include "lict/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "lict/kernels/kernels.hpp"

namespace lict::nn {

using ag::make_node;
using ag::Node;

namespace {

struct ConvGeom {
  long C, H, W, k, s, p, OH, OW;
};

long conv_out(long in, long k, long s, long p) { return (in + 2 * p - k) / s + 1; }

// src [C,H,W] -> cols [C*k*k, OH*OW]
void im2col(const double* src, const ConvGeom& g, double* cols) {
  const long L = g.OH * g.OW;
  for (long c = 0; c < g.C; ++c)
    for (long ky = 0; ky < g.k; ++ky)
      for (long kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((c * g.k + ky) * g.k + kx) * L;
        for (long oy = 0; oy < g.OH; ++oy) {
          const long iy = oy * g.s - g.p + ky;
          if (iy < 0 || iy >= g.H) {
            for (long ox = 0; ox < g.OW; ++ox) row[oy * g.OW + ox] = 0.0;
            continue;
          }
          const double* srow = src + (c * g.H + iy) * g.W;
          for (long ox = 0; ox < g.OW; ++ox) {
            const long ix = ox * g.s - g.p + kx;
            row[oy * g.OW + ox] = (ix < 0 || ix >= g.W) ? 0.0 : srow[ix];
          }
        }
      }
}

// cols [C*k*k, OH*OW] scattered back onto dst [C,H,W] (accumulating).
void col2im(const double* cols, const ConvGeom& g, double* dst) {
  const long L = g.OH * g.OW;
  for (long c = 0; c < g.C; ++c)
    for (long ky = 0; ky < g.k; ++ky)
      for (long kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((c * g.k + ky) * g.k + kx) * L;
        for (long oy = 0; oy < g.OH; ++oy) {
          const long iy = oy * g.s - g.p + ky;
          if (iy < 0 || iy >= g.H) continue;
          double* drow = dst + (c * g.H + iy) * g.W;
          for (long ox = 0; ox < g.OW; ++ox) {
            const long ix = ox * g.s - g.p + kx;
            if (ix >= 0 && ix < g.W) drow[ix] += row[oy * g.OW + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, long stride, long pad) {
  const auto& xs = x->v.shape();
  const auto& ws = w->v.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
    throw std::invalid_argument("conv2d: shape mismatch");
  const long N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const long F = ws[0], k = ws[2];
  if (ws[3] != k) throw std::invalid_argument("conv2d: non-square kernel");
  ConvGeom g{C, H, W, k, stride, pad, conv_out(H, k, stride, pad), conv_out(W, k, stride, pad)};
  if (g.OH < 1 || g.OW < 1)
    throw std::invalid_argument("conv2d: input collapses below one output sample");
  const long K = C * k * k, L = g.OH * g.OW;

  Tensor out({N, F, g.OH, g.OW});
  std::vector<double> cols((size_t)(K * L));
  const auto& ker = kernels::ops();
  for (long n = 0; n < N; ++n) {
    im2col(x->v.data() + n * C * H * W, g, cols.data());
    ker.gemm(w->v.data(), cols.data(), out.data() + n * F * L, F, L, K, false);
    if (b) {
      double* o = out.data() + n * F * L;
      for (long f = 0; f < F; ++f) {
        const double bias = b->v[f];
        for (long i = 0; i < L; ++i) o[f * L + i] += bias;
      }
    }
  }

  Var px = x, pw = w, pb = b;
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), parents, [px, pw, pb, g, N, F, K, L](Node& self) {
    const auto& ker = kernels::ops();
    std::vector<double> cols((size_t)(K * L));
    std::vector<double> dcols((size_t)(K * L));
    const long C = g.C, H = g.H, W = g.W;
    for (long n = 0; n < N; ++n) {
      const double* gn = self.g.data() + n * F * L;
      if (pw->rg || pb) {
        if (pb && pb->rg) {
          Tensor& bg = pb->grad();
          for (long f = 0; f < F; ++f) bg[f] += ker.vsum(gn + f * L, L);
        }
        if (pw->rg) {
          im2col(px->v.data() + n * C * H * W, g, cols.data());
          ker.gemm_nt(gn, cols.data(), pw->grad().data(), F, K, L, true);
        }
      }
      if (px->rg) {
        ker.gemm_tn(pw->v.data(), gn, dcols.data(), K, L, F, false);
        col2im(dcols.data(), g, px->grad().data() + n * C * H * W);
      }
    }
  });
}

Var conv_transpose2d(Var x, Var w, Var b, long stride, long pad) {
  const auto& xs = x->v.shape();
  const auto& ws = w->v.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[0])
    throw std::invalid_argument("conv_transpose2d: shape mismatch");
  const long N = xs[0], C = xs[1], IH = xs[2], IW = xs[3];
  const long F = ws[1], k = ws[2];
  if (ws[3] != k) throw std::invalid_argument("conv_transpose2d: non-square kernel");
  const long OH = (IH - 1) * stride - 2 * pad + k;
  const long OW = (IW - 1) * stride - 2 * pad + k;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv_transpose2d: empty output");
  // Geometry of the adjoint convolution: "input" is the transpose output.
  ConvGeom g{F, OH, OW, k, stride, pad, IH, IW};
  const long OK = F * k * k, L = IH * IW;

  Tensor out({N, F, OH, OW});
  std::vector<double> cols((size_t)(OK * L));
  const auto& ker = kernels::ops();
  for (long n = 0; n < N; ++n) {
    // cols = W^T * x_n, then scatter
    ker.gemm_tn(w->v.data(), x->v.data() + n * C * L, cols.data(), OK, L, C, false);
    double* o = out.data() + n * F * OH * OW;
    col2im(cols.data(), g, o);
    if (b)
      for (long f = 0; f < F; ++f) {
        const double bias = b->v[f];
        for (long i = 0; i < OH * OW; ++i) o[f * OH * OW + i] += bias;
      }
  }

  Var px = x, pw = w, pb = b;
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), parents, [px, pw, pb, g, N, C, F, OK, L](Node& self) {
    const auto& ker = kernels::ops();
    std::vector<double> dcols((size_t)(OK * L));
    const long OH = g.H, OW = g.W;
    for (long n = 0; n < N; ++n) {
      const double* gn = self.g.data() + n * F * OH * OW;
      if (pb && pb->rg) {
        Tensor& bg = pb->grad();
        for (long f = 0; f < F; ++f) bg[f] += ker.vsum(gn + f * OH * OW, OH * OW);
      }
      im2col(gn, g, dcols.data());  // [OK, L]
      if (px->rg)
        ker.gemm(pw->v.data(), dcols.data(), px->grad().data() + n * C * L, C, L, OK, true);
      if (pw->rg)
        ker.gemm_nt(px->v.data() + n * C * L, dcols.data(), pw->grad().data(), C, OK, L, true);
    }
  });
}

Var avg_pool(Var x, long k) {
  const auto& xs = x->v.shape();
  if (xs.size() != 4 || xs[2] % k != 0 || xs[3] % k != 0)
    throw std::invalid_argument("avg_pool: input not divisible by kernel");
  const long N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const long OH = H / k, OW = W / k;
  Tensor out({N, C, OH, OW});
  const double inv = 1.0 / (double)(k * k);
  for (long nc = 0; nc < N * C; ++nc) {
    const double* src = x->v.data() + nc * H * W;
    double* dst = out.data() + nc * OH * OW;
    for (long oy = 0; oy < OH; ++oy)
      for (long ox = 0; ox < OW; ++ox) {
        double s = 0.0;
        for (long dy = 0; dy < k; ++dy)
          for (long dx = 0; dx < k; ++dx) s += src[(oy * k + dy) * W + ox * k + dx];
        dst[oy * OW + ox] = s * inv;
      }
  }
  Var px = x;
  return make_node(std::move(out), {x}, [px, k, N, C, H, W, OH, OW](Node& self) {
    if (!px->rg) return;
    const double inv = 1.0 / (double)(k * k);
    Tensor& pg = px->grad();
    for (long nc = 0; nc < N * C; ++nc) {
      double* dst = pg.data() + nc * H * W;
      const double* gsrc = self.g.data() + nc * OH * OW;
      for (long oy = 0; oy < OH; ++oy)
        for (long ox = 0; ox < OW; ++ox) {
          const double gv = gsrc[oy * OW + ox] * inv;
          for (long dy = 0; dy < k; ++dy)
            for (long dx = 0; dx < k; ++dx) dst[(oy * k + dy) * W + ox * k + dx] += gv;
        }
    }
  });
}

Var global_avg_pool(Var x) {
  const auto& xs = x->v.shape();
  if (xs.size() != 4) throw std::invalid_argument("global_avg_pool: expected 4D");
  const long N = xs[0], C = xs[1], HW = xs[2] * xs[3];
  Tensor out({N, C});
  const auto& ker = kernels::ops();
  for (long nc = 0; nc < N * C; ++nc) out[nc] = ker.vsum(x->v.data() + nc * HW, HW) / (double)HW;
  Var px = x;
  return make_node(std::move(out), {x}, [px, N, C, HW](Node& self) {
    if (!px->rg) return;
    Tensor& pg = px->grad();
    for (long nc = 0; nc < N * C; ++nc) {
      const double gv = self.g[nc] / (double)HW;
      double* dst = pg.data() + nc * HW;
      for (long i = 0; i < HW; ++i) dst[i] += gv;
    }
  });
}

Var linear(Var x, Var w, Var b) {
  Var y = ag::matmul(std::move(x), w);
  if (!b) return y;
  Var b2 = ag::reshape(b, {1, b->v.numel()});
  return ag::add(std::move(y), std::move(b2));
}

Var ce_map(Var logits, const std::vector<long>& labels) {
  const auto& s = logits->v.shape();
  if (s.size() != 4) throw std::invalid_argument("ce_map: logits must be [N,C,H,W]");
  const long N = s[0], C = s[1], H = s[2], W = s[3];
  const long P = N * H * W;
  if ((long)labels.size() != P) throw std::invalid_argument("ce_map: label count mismatch");
  const long HW = H * W;
  double total = 0.0;
  for (long n = 0; n < N; ++n)
    for (long i = 0; i < HW; ++i) {
      const double* lg = logits->v.data() + n * C * HW;
      double mx = lg[i];
      for (long c = 1; c < C; ++c) mx = std::max(mx, lg[c * HW + i]);
      double se = 0.0;
      for (long c = 0; c < C; ++c) se += std::exp(lg[c * HW + i] - mx);
      const long y = labels[n * HW + i];
      if (y < 0 || y >= C) throw std::invalid_argument("ce_map: label out of range");
      total += mx + std::log(se) - lg[y * HW + i];
    }
  Tensor out = Tensor::scalar(total / (double)P);
  Var pl = logits;
  auto lab = std::make_shared<std::vector<long>>(labels);
  return make_node(std::move(out), {logits}, [pl, lab, N, C, HW, P](Node& self) {
    if (!pl->rg) return;
    const double gscale = self.g[0] / (double)P;
    Tensor& pg = pl->grad();
    for (long n = 0; n < N; ++n)
      for (long i = 0; i < HW; ++i) {
        const double* lg = pl->v.data() + n * C * HW;
        double* gg = pg.data() + n * C * HW;
        double mx = lg[i];
        for (long c = 1; c < C; ++c) mx = std::max(mx, lg[c * HW + i]);
        double se = 0.0;
        for (long c = 0; c < C; ++c) se += std::exp(lg[c * HW + i] - mx);
        const long y = (*lab)[n * HW + i];
        for (long c = 0; c < C; ++c) {
          const double p = std::exp(lg[c * HW + i] - mx) / se;
          gg[c * HW + i] += gscale * (p - (c == y ? 1.0 : 0.0));
        }
      }
  });
}

// ----- layers -----

namespace {
Tensor he_init(std::vector<long> shape, long fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double s = std::sqrt(2.0 / (double)fan_in);
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.normal() * s;
  return t;
}
}  // namespace

Conv2d::Conv2d(long cin, long cout, long k, long stride_, long pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  w = ag::parameter(he_init({cout, cin, k, k}, cin * k * k, rng));
  b = ag::parameter(Tensor({cout}));
}

ParamDict Conv2d::params(const std::string& name) const {
  ParamDict d;
  d.add(name + ".w", w);
  d.add(name + ".b", b);
  return d;
}

ConvT2d::ConvT2d(long cin, long cout, long k, long stride_, long pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  w = ag::parameter(he_init({cin, cout, k, k}, cin * k * k, rng));
  b = ag::parameter(Tensor({cout}));
}

ParamDict ConvT2d::params(const std::string& name) const {
  ParamDict d;
  d.add(name + ".w", w);
  d.add(name + ".b", b);
  return d;
}

Linear::Linear(long in, long out, Rng& rng) {
  w = ag::parameter(he_init({in, out}, in, rng));
  b = ag::parameter(Tensor({out}));
}

ParamDict Linear::params(const std::string& name) const {
  ParamDict d;
  d.add(name + ".w", w);
  d.add(name + ".b", b);
  return d;
}

Adam::Adam(std::vector<Var> params, double lr) : params_(std::move(params)), lr_(lr) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->v.shape());
    v_.emplace_back(p->v.shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, (double)t_);
  const double bc2 = 1.0 - std::pow(beta2_, (double)t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    if (!p.has_grad()) continue;  // never touched this step
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (long j = 0; j < p.v.numel(); ++j) {
      const double g = p.g[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      p.v[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_)
    if (p->has_grad()) p->g.fill(0.0);
}

}  // namespace lict::nn
