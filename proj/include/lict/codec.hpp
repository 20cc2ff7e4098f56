#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lict/image.hpp"
#include "lict/nn.hpp"
#include "lict/rng.hpp"

namespace lict::codec {

using ag::Var;

// The published lambda grid pairs with squared error on the 8-bit scale;
// training multiplies the quality weight by this constant while metrics stay
// on the [0,1] scale.
inline constexpr double kDistortionScale = 255.0 * 255.0;

// Rate floor: probabilities are clamped to >= kProbFloor before the log.
inline constexpr double kProbFloor = 1e-9;

enum class EntropyKind { Factorized, Hyperprior };

struct Arch {
  EntropyKind entropy = EntropyKind::Hyperprior;
  long hidden = 32;        // transform width
  long latent = 48;        // y channels
  long hyper_hidden = 24;  // hyper transform width
  long hyper_latent = 16;  // z channels
  long stages = 4;         // stride-2 stages in g_a / g_s

  long total_stride() const { return 1L << stages; }
  std::string descriptor() const;
  static Arch from_descriptor(const std::string& s);
  bool operator==(const Arch&) const = default;
};

// Learnable monotone CDF per channel (stacked 1-d monotone layers with tanh
// gates and a final sigmoid); p(k) = c(k+1/2) - c(k-1/2).
struct FactorizedPrior {
  long channels = 0;
  long width = 4;
  Var m1, b1, a1;  // [C,w,1] each
  Var m2, b2, a2;  // m2: [C,w,w]
  Var m3, b3;      // m3: [C,1,w], b3: [C,1,1]

  FactorizedPrior() = default;
  FactorizedPrior(long channels, Rng& rng);

  Var cdf(Var u) const;            // u: [C,1,M] -> [C,1,M]
  Var bits(Var values) const;      // values: [N,C,h,w] -> per-element bits, same shape
  nn::ParamDict params(const std::string& name) const;
};

// Per-element bits of a zero-mean Gaussian conditional with scale map sigma.
Var gaussian_bits(Var values, Var sigma);

struct RdParts {
  Var bpp;   // estimated rate, bits per source pixel
  Var dist;  // MSE on the [0,1] scale
  Var loss;  // bpp + lambda * kDistortionScale * dist
};

struct RatePoint {
  double bits = 0.0;
  double bpp = 0.0;
  bool floored = false;  // some element hit the probability floor
};

struct RdPoint {
  double bpp = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
};

struct CodecModel {
  Arch arch;
  double lambda = 0.0130;

  nn::Conv2d ea1, ea2, ea3, ea4;
  nn::ConvT2d ds1, ds2, ds3, ds4;
  FactorizedPrior y_prior;  // factorized entropy model (directly on y, or unused)
  nn::Conv2d ha1, ha2, ha3;
  nn::ConvT2d hs1, hs2;
  nn::Conv2d hs3;
  FactorizedPrior z_prior;

  static CodecModel create(const Arch& arch, double lambda, uint64_t seed);
  CodecModel clone() const;

  double train_lambda() const { return lambda * kDistortionScale; }

  // Graph builders. x: [N,3,H,W]; latents y: [N,latent,H/2^s,W/2^s].
  Var encode(Var x) const;
  Var decode(Var y_hat) const;  // clamped to [0,1]
  Var hyper_encode(Var y) const;
  Var sigma_of(Var z_hat) const;

  // Per-element rate of noisy/rounded latents; z term included for the
  // hyperprior. Returns total bits as a scalar Var.
  Var total_bits(Var y_quantized, std::optional<Var> z_quantized) const;

  // Noise-quantized training loss on a batch.
  RdParts rd_loss(Var x, Rng& noise_rng) const;

  nn::ParamDict encoder_params() const;
  nn::ParamDict decoder_params() const;
  nn::ParamDict entropy_params() const;
  nn::ParamDict all_params() const;

  void validate_input(long h, long w) const;
};

// ----- tensor-level (eval) API -----

Tensor quantize_noise(const Tensor& y, Rng& rng);  // y + U(-1/2,1/2)
Tensor quantize_round(const Tensor& y);            // round half away from zero

Tensor encode_eval(const CodecModel& m, const Tensor& image);
Tensor decode_eval(const CodecModel& m, const Tensor& latent);

// Rounded-latent rate of one image; counts both y and z for the hyperprior.
RatePoint rate_eval(const CodecModel& m, const Tensor& image);
RdPoint rd_eval(const CodecModel& m, const Tensor& image);

// Reconstruction of one image through rounding quantization.
Tensor reconstruct_eval(const CodecModel& m, const Tensor& image);

struct TrainLogRow {
  long step = 0;
  double bpp = 0.0;
  double dist = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  CodecModel model;
  std::vector<TrainLogRow> log;
};

struct TrainConfig {
  long steps = 1000;
  long batch = 8;
  double lr = 1e-4;
  long log_every = 50;
};

// Vanilla rate-distortion training from scratch on [0,1] images of equal size.
TrainResult train_vanilla(const std::vector<Tensor>& dataset, const Arch& arch, double lambda,
                          const TrainConfig& cfg, uint64_t seed);

}  // namespace lict::codec
