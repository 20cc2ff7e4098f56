#pragma once

#include <memory>
#include <string>

#include "lict/dct.hpp"
#include "lict/image.hpp"
#include "lict/nn.hpp"

namespace lict::trig {

using ag::Var;

enum class ScoreSource { Learned, FixedSensitivity };

struct TriggerConfig {
  long patch = 16;      // P
  long n_freq = 64;     // N, mid-band width
  long k_top = 16;      // K kept frequencies per channel
  long band_start = -1; // zigzag start; -1 means centered band
  double eps = 0.005;   // stealth bound: MSE(x_p,x) <= eps^2
  double gamma = 1e4;   // stealth hinge weight
  double mag_max = 0.5; // magnitude bound (sigmoid * mag_max)
  ScoreSource score_source = ScoreSource::Learned;
  bool input_dependent = true;  // magnitudes from image features vs a free parameter

  dct::MidBand band() const {
    return band_start < 0 ? dct::centered_band(patch, n_freq)
                          : dct::MidBand{band_start, n_freq};
  }
};

// Anything that can turn a clean image into a poisoned one inside a graph.
struct TriggerFn {
  virtual ~TriggerFn() = default;
  virtual Var poison(const Tensor& x) const = 0;
  virtual std::vector<Var> trainable() const { return {}; }
  virtual std::string name() const = 0;
};

// Hard TopK selection & reweighting on plain tensors: per channel, zero the
// N-K largest-sensitivity entries and scale the K smallest, ranked ascending
// (rank 0 = least sensitive), by sqrt((K-1-i)/(K-1) + 1/2); K=1 uses
// sqrt(3/2). Ties in I break toward the lower index.
Tensor topk_select_reweight(const Tensor& magnitudes, const Tensor& sensitivity, long k);

// Same selection as a graph op. Gradients reach `magnitudes` through the hard
// weights; if `scores` requires gradients they arrive through a softmax
// straight-through relaxation of the selection.
Var topk_select_reweight_op(Var magnitudes, Var scores, long k);

// gamma * max(MSE(x, x_p), eps^2); zero gradient below the threshold.
Var stealth_penalty(const Tensor& x, Var x_p, double eps, double gamma);

// Frequency-domain trigger injection model: a general-trigger generator
// (local features -> per-frequency magnitudes), a patch-weight generator
// (global features -> one scalar per patch), and the TopK stage between them.
struct TriggerModel : TriggerFn {
  TriggerConfig cfg;

  nn::Conv2d g1, g2, g3;  // general-trigger trunk
  nn::Linear g_head;      // -> [3*N] magnitude logits
  nn::Linear s_head;      // -> [3*N] learned frequency scores
  Var free_mag;           // magnitude logits for the free-parameter mode

  nn::Conv2d w1, w2, w3;  // patch-weight trunk
  nn::Conv2d w_head;      // 1x1 -> 1 channel on the patch grid
  Tensor sensitivity;     // frozen [3,N] map for ScoreSource::FixedSensitivity

  static TriggerModel create(const TriggerConfig& cfg, uint64_t seed);

  // mT: [3,N], nonnegative, bounded by mag_max; sample-specific when
  // input_dependent.
  Var magnitudes(const Tensor& x) const;
  // Learned per-frequency scores [3,N] from the same trunk.
  Var scores(const Tensor& x) const;
  // One nonnegative scalar per patch, [nP] for the ceil(H/P) x ceil(W/P) grid.
  Var patch_weights(const Tensor& x) const;

  Var poison(const Tensor& x) const override;
  std::vector<Var> trainable() const override;
  std::string name() const override {
    return cfg.score_source == ScoreSource::Learned ? "freq-adaptive" : "freq-robust";
  }

  Var stealth(const Tensor& x, Var x_p) const {
    return stealth_penalty(x, std::move(x_p), cfg.eps, cfg.gamma);
  }

  nn::ParamDict params() const;
};

// ----- graph pieces shared with the sensitivity oracle -----

// Additive mid-band delta for every patch: delta[c,p,:,:] = grid[c,:,:] * w[p].
Var patch_outer_op(Var grid, Var weights, long num_patches);
Var embed_midband_op(Var mid_values, dct::MidBand band, long patch);
Var idct2_op(Var blocks, const dct::BlockGrid& geom);
Var merge_patches_op(Var blocks, const dct::BlockGrid& geom);

// x_p = clamp01(merge(idct2(dct2(split(x)) + delta))) for a [3,nP,P,P] delta.
Var inject_delta(const Tensor& x, Var delta, long patch);

// ----- baseline triggers -----

// White square at the bottom-right covering ~area_frac of the image.
Tensor baseline_badnets(const Tensor& x, double area_frac = 0.1);
// (1-prop)*x + prop*pattern, pattern tiled spatially to the image size.
Tensor baseline_blended(const Tensor& x, const Tensor& pattern, double prop = 0.01);
// Fixed-magnitude injection at fixed zigzag channels of every patch.
Tensor baseline_ftrojan(const Tensor& x, const std::vector<long>& channels,
                        const std::vector<double>& magnitudes, long patch = 16);

struct BadnetsTrigger : TriggerFn {
  double area_frac = 0.1;
  Var poison(const Tensor& x) const override;
  std::string name() const override { return "badnets"; }
};

struct BlendedTrigger : TriggerFn {
  Tensor pattern;
  double prop = 0.01;
  Var poison(const Tensor& x) const override;
  std::string name() const override { return "blended"; }
};

struct FtrojanTrigger : TriggerFn {
  std::vector<long> channels{128, 254};  // one mid, one high (zigzag, P=16)
  std::vector<double> magnitudes{0.04, 0.04};
  long patch = 16;
  Var poison(const Tensor& x) const override;
  std::string name() const override { return "ftrojan"; }
};

// Spatial-domain generator baseline: x + eps * Normalize(U(x)), where U is a
// small trainable conv net and Normalize scales to unit mean square.
struct LiraTrigger : TriggerFn {
  nn::Conv2d u1, u2, u3;
  double eps = 0.005;
  static LiraTrigger create(double eps, uint64_t seed);
  Var poison(const Tensor& x) const override;
  std::vector<Var> trainable() const override;
  std::string name() const override { return "lira"; }
  nn::ParamDict params() const;
};

}  // namespace lict::trig
