#include "lict/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lict::trig {

using namespace lict::ag;

// ---------------------------------------------------------------------------
// TopK selection & reweighting

namespace {

// Hard per-channel weights: 0 on the N-K most sensitive entries, the rank
// factor on the K least sensitive ones.
Tensor hard_weights(const Tensor& sensitivity, long k) {
  const long n = sensitivity.extent(1);
  Tensor w({3, n});
  for (long c = 0; c < 3; ++c) {
    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](long a, long b) {
      return sensitivity.at(c, a) < sensitivity.at(c, b);
    });
    for (long i = 0; i < k; ++i) {
      const double f = k == 1 ? std::sqrt(1.5)
                              : std::sqrt((double)(k - 1 - i) / (double)(k - 1) + 0.5);
      w.at(c, idx[(size_t)i]) = f;
    }
  }
  return w;
}

}  // namespace

Tensor topk_select_reweight(const Tensor& magnitudes, const Tensor& sensitivity, long k) {
  if (magnitudes.ndim() != 2 || magnitudes.extent(0) != 3 ||
      !magnitudes.same_shape(sensitivity))
    throw std::invalid_argument("topk_select_reweight: expected matching [3,N] tensors");
  const long n = magnitudes.extent(1);
  if (k < 1 || k > n) throw std::invalid_argument("topk_select_reweight: K out of range");
  for (long i = 0; i < sensitivity.numel(); ++i)
    if (!std::isfinite(sensitivity[i]))
      throw std::invalid_argument("topk_select_reweight: non-finite sensitivity");
  Tensor w = hard_weights(sensitivity, k);
  Tensor out = magnitudes;
  for (long i = 0; i < out.numel(); ++i) out[i] *= w[i];
  return out;
}

Var topk_select_reweight_op(Var magnitudes, Var scores, long k) {
  Tensor w = hard_weights(scores->v, k);
  Tensor out = magnitudes->v;
  for (long i = 0; i < out.numel(); ++i) out[i] *= w[i];
  const long n = magnitudes->v.extent(1);
  Var pm = magnitudes, ps = scores;
  auto wcopy = std::make_shared<Tensor>(std::move(w));
  return make_node(std::move(out), {magnitudes, scores}, [pm, ps, wcopy, k, n](Node& self) {
    if (pm->rg) {
      Tensor& mg = pm->grad();
      for (long i = 0; i < mg.numel(); ++i) mg[i] += self.g[i] * (*wcopy)[i];
    }
    if (ps->rg) {
      // Straight-through: treat the hard selection as K*softmax(-scores) in
      // the backward pass only.
      Tensor& sg = ps->grad();
      for (long c = 0; c < 3; ++c) {
        std::vector<double> p((size_t)n);
        double mx = -1e300;
        for (long j = 0; j < n; ++j) mx = std::max(mx, -ps->v.at(c, j));
        double z = 0.0;
        for (long j = 0; j < n; ++j) z += p[(size_t)j] = std::exp(-ps->v.at(c, j) - mx);
        for (long j = 0; j < n; ++j) p[(size_t)j] /= z;
        double dot = 0.0;
        std::vector<double> t((size_t)n);
        for (long j = 0; j < n; ++j) {
          t[(size_t)j] = self.g.at(c, j) * pm->v.at(c, j) * (double)k;
          dot += t[(size_t)j] * p[(size_t)j];
        }
        for (long j = 0; j < n; ++j)
          sg.at(c, j) += p[(size_t)j] * (dot - t[(size_t)j]);
      }
    }
  });
}

Var stealth_penalty(const Tensor& x, Var x_p, double eps, double gamma) {
  Var d = mse(constant(x), std::move(x_p));
  Var hinge = vmax(std::move(d), constant(Tensor::scalar(eps * eps)));
  return scale(std::move(hinge), gamma);
}

// ---------------------------------------------------------------------------
// graph pieces around the blockwise DCT

Var patch_outer_op(Var grid, Var weights, long num_patches) {
  const long p = grid->v.extent(1);
  Tensor out({3, num_patches, p, p});
  for (long c = 0; c < 3; ++c)
    for (long pp = 0; pp < num_patches; ++pp) {
      const double wv = weights->v[pp];
      const double* g = grid->v.data() + c * p * p;
      double* o = out.data() + (c * num_patches + pp) * p * p;
      for (long i = 0; i < p * p; ++i) o[i] = g[i] * wv;
    }
  Var pg = grid, pw = weights;
  return make_node(std::move(out), {grid, weights}, [pg, pw, num_patches, p](Node& self) {
    if (pg->rg) {
      Tensor& gg = pg->grad();
      for (long c = 0; c < 3; ++c)
        for (long pp = 0; pp < num_patches; ++pp) {
          const double wv = pw->v[pp];
          const double* up = self.g.data() + (c * num_patches + pp) * p * p;
          double* d = gg.data() + c * p * p;
          for (long i = 0; i < p * p; ++i) d[i] += up[i] * wv;
        }
    }
    if (pw->rg) {
      Tensor& wg = pw->grad();
      for (long c = 0; c < 3; ++c)
        for (long pp = 0; pp < num_patches; ++pp) {
          const double* up = self.g.data() + (c * num_patches + pp) * p * p;
          const double* g = pg->v.data() + c * p * p;
          double s = 0.0;
          for (long i = 0; i < p * p; ++i) s += up[i] * g[i];
          wg[pp] += s;
        }
    }
  });
}

Var embed_midband_op(Var mid_values, dct::MidBand band, long patch) {
  Tensor out = dct::embed_midband(mid_values->v, band, patch);
  Var pm = mid_values;
  return make_node(std::move(out), {mid_values}, [pm, band, patch](Node& self) {
    if (!pm->rg) return;
    Tensor back = dct::extract_midband(self.g, band, patch);
    Tensor& mg = pm->grad();
    for (long i = 0; i < mg.numel(); ++i) mg[i] += back[i];
  });
}

Var idct2_op(Var blocks, const dct::BlockGrid& geom) {
  dct::BlockGrid in = geom;
  in.coeffs = blocks->v;
  Tensor out = dct::idct2(in).coeffs;
  Var pb = blocks;
  dct::BlockGrid g = geom;
  return make_node(std::move(out), {blocks}, [pb, g](Node& self) {
    if (!pb->rg) return;
    dct::BlockGrid up = g;
    up.coeffs = self.g;
    Tensor back = dct::dct2(up).coeffs;  // adjoint of an orthonormal inverse
    Tensor& bg = pb->grad();
    for (long i = 0; i < bg.numel(); ++i) bg[i] += back[i];
  });
}

Var merge_patches_op(Var blocks, const dct::BlockGrid& geom) {
  dct::BlockGrid in = geom;
  in.coeffs = blocks->v;
  Tensor out = dct::merge_patches(in);
  Var pb = blocks;
  dct::BlockGrid g = geom;
  return make_node(std::move(out), {blocks}, [pb, g](Node& self) {
    if (!pb->rg) return;
    // adjoint of merge: image grad lands on unpadded block positions
    Tensor& bg = pb->grad();
    for (long c = 0; c < 3; ++c)
      for (long br = 0; br < g.rows; ++br)
        for (long bc = 0; bc < g.cols; ++bc) {
          const long pp = br * g.cols + bc;
          const long ylim = std::min(g.patch, g.height - br * g.patch);
          const long xlim = std::min(g.patch, g.width - bc * g.patch);
          for (long y = 0; y < ylim; ++y)
            for (long x = 0; x < xlim; ++x)
              bg.at(c, pp, y, x) += self.g[(c * g.height + br * g.patch + y) * g.width +
                                           bc * g.patch + x];
        }
  });
}

Var inject_delta(const Tensor& x, Var delta, long patch) {
  dct::BlockGrid spatial = dct::split_patches(x, patch);
  dct::BlockGrid freq = dct::dct2(spatial);
  Var coeffs = add(constant(freq.coeffs), std::move(delta));
  Var back = idct2_op(std::move(coeffs), freq);
  Var image = merge_patches_op(std::move(back), freq);
  return clamp(std::move(image), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// TriggerModel

TriggerModel TriggerModel::create(const TriggerConfig& cfg, uint64_t seed) {
  if (cfg.k_top < 1 || cfg.k_top > cfg.n_freq)
    throw std::invalid_argument("TriggerModel: need 0 < K <= N");
  dct::validate_band(cfg.band(), cfg.patch);
  Rng rng(seed);
  TriggerModel t;
  t.cfg = cfg;
  t.g1 = nn::Conv2d(3, 16, 3, 2, 1, rng);
  t.g2 = nn::Conv2d(16, 32, 3, 2, 1, rng);
  t.g3 = nn::Conv2d(32, 32, 3, 2, 1, rng);
  t.g_head = nn::Linear(32, 3 * cfg.n_freq, rng);
  // start near-stealthy: small magnitudes at init
  t.g_head.b->v.fill(-2.0);
  t.s_head = nn::Linear(32, 3 * cfg.n_freq, rng);
  t.free_mag = parameter(Tensor({3, cfg.n_freq}, -2.0));
  t.w1 = nn::Conv2d(3, 16, 3, 2, 1, rng);
  t.w2 = nn::Conv2d(16, 24, 3, 2, 1, rng);
  t.w3 = nn::Conv2d(24, 32, 3, 2, 1, rng);
  t.w_head = nn::Conv2d(32, 1, 1, 1, 0, rng);
  return t;
}

namespace {
Var image_batch(const Tensor& x) {
  check_image(x, "trigger");
  return constant(x.reshaped({1, 3, x.extent(1), x.extent(2)}));
}
}  // namespace

Var TriggerModel::magnitudes(const Tensor& x) const {
  if (!cfg.input_dependent)
    return scale(sigmoid(free_mag), cfg.mag_max);
  const double slope = 0.1;
  Var h = leaky_relu(g1(image_batch(x)), slope);
  h = leaky_relu(g2(h), slope);
  h = leaky_relu(g3(h), slope);
  Var feat = nn::global_avg_pool(h);             // [1,32]
  Var logits = g_head(feat);                     // [1,3N]
  return reshape(scale(sigmoid(logits), cfg.mag_max), {3, cfg.n_freq});
}

Var TriggerModel::scores(const Tensor& x) const {
  const double slope = 0.1;
  Var h = leaky_relu(g1(image_batch(x)), slope);
  h = leaky_relu(g2(h), slope);
  h = leaky_relu(g3(h), slope);
  Var feat = nn::global_avg_pool(h);
  return reshape(s_head(feat), {3, cfg.n_freq});
}

Var TriggerModel::patch_weights(const Tensor& x) const {
  check_image(x, "patch_weights");
  const long h = x.extent(1), w = x.extent(2), p = cfg.patch;
  if (h % p != 0 || w % p != 0 || p % 8 != 0)
    throw std::invalid_argument(
        "patch_weights: needs image dims divisible by P and P divisible by 8");
  const double slope = 0.1;
  Var f = leaky_relu(w1(image_batch(x)), slope);
  f = leaky_relu(w2(f), slope);
  f = leaky_relu(w3(f), slope);          // [1,32,H/8,W/8]
  f = nn::avg_pool(f, p / 8);            // [1,32,H/P,W/P]
  // mix in a global context so each patch weight sees the whole image
  Var g = reshape(nn::global_avg_pool(f), {1, 32, 1, 1});
  f = add(f, g);
  Var wmap = softplus(w_head(f));        // [1,1,H/P,W/P]
  return reshape(wmap, {(h / p) * (w / p)});
}

Var TriggerModel::poison(const Tensor& x) const {
  Var mt = magnitudes(x);
  Var sel;
  if (cfg.score_source == ScoreSource::Learned) {
    sel = topk_select_reweight_op(mt, scores(x), cfg.k_top);
  } else {
    if (sensitivity.numel() != 3 * cfg.n_freq)
      throw std::invalid_argument("TriggerModel: fixed-sensitivity mode needs a [3,N] map");
    sel = topk_select_reweight_op(mt, constant(sensitivity), cfg.k_top);
  }
  Var grid = embed_midband_op(std::move(sel), cfg.band(), cfg.patch);
  Var w = patch_weights(x);
  const long np = w->v.numel();
  Var delta = patch_outer_op(std::move(grid), std::move(w), np);
  return inject_delta(x, std::move(delta), cfg.patch);
}

std::vector<Var> TriggerModel::trainable() const { return params().vars(); }

nn::ParamDict TriggerModel::params() const {
  nn::ParamDict d;
  d.add("g1.w", g1.w);
  d.add("g1.b", g1.b);
  d.add("g2.w", g2.w);
  d.add("g2.b", g2.b);
  d.add("g3.w", g3.w);
  d.add("g3.b", g3.b);
  d.add("ghead.w", g_head.w);
  d.add("ghead.b", g_head.b);
  d.add("shead.w", s_head.w);
  d.add("shead.b", s_head.b);
  d.add("freemag", free_mag);
  d.add("w1.w", w1.w);
  d.add("w1.b", w1.b);
  d.add("w2.w", w2.w);
  d.add("w2.b", w2.b);
  d.add("w3.w", w3.w);
  d.add("w3.b", w3.b);
  d.add("whead.w", w_head.w);
  d.add("whead.b", w_head.b);
  return d;
}

// ---------------------------------------------------------------------------
// baselines

Tensor baseline_badnets(const Tensor& x, double area_frac) {
  check_image(x, "baseline_badnets");
  if (area_frac <= 0.0 || area_frac > 1.0)
    throw std::invalid_argument("baseline_badnets: bad area fraction");
  const long h = x.extent(1), w = x.extent(2);
  const long side = std::max<long>(
      1, (long)round_half_away(std::sqrt(area_frac * (double)(h * w))));
  Tensor out = x;
  for (long c = 0; c < 3; ++c)
    for (long y = std::max<long>(0, h - side); y < h; ++y)
      for (long xx = std::max<long>(0, w - side); xx < w; ++xx) out.at(c, y, xx) = 1.0;
  return out;
}

Tensor baseline_blended(const Tensor& x, const Tensor& pattern, double prop) {
  check_image(x, "baseline_blended");
  check_image(pattern, "baseline_blended pattern");
  if (prop < 0.0 || prop > 1.0) throw std::invalid_argument("baseline_blended: bad proportion");
  const long h = x.extent(1), w = x.extent(2);
  const long ph = pattern.extent(1), pw = pattern.extent(2);
  Tensor out({3, h, w});
  for (long c = 0; c < 3; ++c)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx)
        out.at(c, y, xx) =
            (1.0 - prop) * x.at(c, y, xx) + prop * pattern.at(c, y % ph, xx % pw);
  clamp01_inplace(out);
  return out;
}

Tensor baseline_ftrojan(const Tensor& x, const std::vector<long>& channels,
                        const std::vector<double>& magnitudes, long patch) {
  if (channels.size() != magnitudes.size() || channels.empty())
    throw std::invalid_argument("baseline_ftrojan: channels/magnitudes mismatch");
  auto freq = dct::dct2(dct::split_patches(x, patch));
  const auto& zz = dct::zigzag_order(patch);
  const long pp = patch * patch;
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 0 || channels[i] >= pp)
      throw std::invalid_argument("baseline_ftrojan: channel out of range");
    const long pos = zz[(size_t)channels[i]];
    for (long c = 0; c < 3; ++c)
      for (long p = 0; p < freq.num_patches(); ++p)
        freq.coeffs.data()[(c * freq.num_patches() + p) * pp + pos] += magnitudes[i];
  }
  Tensor out = dct::merge_patches(dct::idct2(freq));
  clamp01_inplace(out);
  return out;
}

Var BadnetsTrigger::poison(const Tensor& x) const {
  return constant(baseline_badnets(x, area_frac));
}

Var BlendedTrigger::poison(const Tensor& x) const {
  return constant(baseline_blended(x, pattern, prop));
}

Var FtrojanTrigger::poison(const Tensor& x) const {
  return constant(baseline_ftrojan(x, channels, magnitudes, patch));
}

LiraTrigger LiraTrigger::create(double eps, uint64_t seed) {
  Rng rng(seed);
  LiraTrigger t;
  t.eps = eps;
  t.u1 = nn::Conv2d(3, 16, 3, 1, 1, rng);
  t.u2 = nn::Conv2d(16, 16, 3, 1, 1, rng);
  t.u3 = nn::Conv2d(16, 3, 3, 1, 1, rng);
  return t;
}

Var LiraTrigger::poison(const Tensor& x) const {
  const double slope = 0.1;
  Var xin = image_batch(x);
  Var u = leaky_relu(u1(xin), slope);
  u = leaky_relu(u2(u), slope);
  u = u3(u);
  // Normalize to unit mean square, then scale to eps
  Var rms = sqrt_(clamp_min(mean(square(u)), 1e-18));
  Var unit = div(std::move(u), std::move(rms));
  Var xp = add(xin, scale(std::move(unit), eps));
  return reshape(clamp(std::move(xp), 0.0, 1.0), {3, x.extent(1), x.extent(2)});
}

std::vector<Var> LiraTrigger::trainable() const { return params().vars(); }

nn::ParamDict LiraTrigger::params() const {
  nn::ParamDict d;
  d.add("u1.w", u1.w);
  d.add("u1.b", u1.b);
  d.add("u2.w", u2.w);
  d.add("u2.b", u2.b);
  d.add("u3.w", u3.w);
  d.add("u3.b", u3.b);
  return d;
}

}  // namespace lict::trig
