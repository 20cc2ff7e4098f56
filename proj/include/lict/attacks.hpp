#pragma once

#include <memory>
#include <string>

#include "lict/codec.hpp"
#include "lict/downstream.hpp"
#include "lict/sensitivity.hpp"
#include "lict/trigger.hpp"

namespace lict::atk {

using ag::Var;

enum class ObjectiveKind { Bpp, Psnr, Seg, Face };

std::string objective_name(ObjectiveKind k);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Bpp;
  double alpha = 0.1;        // static-form / downstream clean-preservation weight
  double beta = 0.01;        // attack-objective weight
  bool dynamic_form = true;  // dynamic losses vs the static ablation forms
  bool transfer = false;     // boundary-shift + unwanted-class terms
  double weight = 1.0;       // per-objective combination weight in the encoder loss
  double gamma_t = 0.1;      // unwanted-class regularizer weight (segmentation)
  long source_class = ds::kCircle;
  long target_class = ds::kSquare;
  long unwanted_class = ds::kTriangle;
};

// ----- scalar loss builders -----

// -10*log10(max(mse,1e-10)); caps at 100 dB for vanishing error.
Var psnr_db(Var mse_value);

// R(x) + lambda*max(D(x),D(xp)) - beta*R(xp)
Var loss_bpp_dynamic(Var r_x, Var d_x, Var d_xp, Var r_xp, double lambda, double beta);
// max(R(x),R(xp)) + lambda*D(x) + beta*lambda*PSNR(x, f(xp))
Var loss_psnr_dynamic(Var r_x, Var r_xp, Var d_x, Var psnr_xp, double lambda, double beta);
// L(x) + alpha*D(xp) - beta*R(xp)
Var loss_bpp_static(Var r_x, Var d_x, Var d_xp, Var r_xp, double lambda, double alpha,
                    double beta);
// L(x) + alpha*R(xp) + beta*lambda*PSNR(x, f(xp))
Var loss_psnr_static(Var r_x, Var d_x, Var r_xp, Var psnr_xp, double lambda, double alpha,
                     double beta);
// L(x) + alpha*L(xp) + beta*L_DS
Var loss_downstream(Var loss_clean, Var loss_poisoned, Var loss_ds, double alpha, double beta);

// x_p = (1-M) (.) x + M (.) T(x); mask is [H,W] over all channels.
Var compose_masked_poison(const Tensor& x, const trig::TriggerFn& trigger, const Tensor& mask);

// Attack-objective terms for the toy downstream models. recon_* are decoded
// batches [N,3,H,W]; eta/tau are label maps flattened like ce_map expects.
Var loss_seg_targeted(const ds::ToySegmenter& seg, Var recon_poisoned,
                      const std::vector<long>& eta);
Var loss_face(const ds::ToyEmbedder& emb, Var recon_clean, Var recon_attacked);
// Boundary-shift variants: attack loss on mu*g(f(xp)) + (1-mu)*g(f(x)),
// minus gamma_t * CE toward the unwanted map (segmentation only).
Var loss_transfer_ss(const ds::ToySegmenter& seg, Var recon_poisoned, Var recon_clean,
                     const std::vector<long>& eta, const std::vector<long>& tau, double mu,
                     double gamma_t);
Var loss_transfer_fr(const ds::ToyEmbedder& emb, Var recon_clean, Var recon_poisoned, double mu);

// ----- training loops -----

struct AttackData {
  std::vector<Tensor> main_images;        // T_m
  std::vector<ds::ShapesSample> seg_aux;  // T_a for the segmentation attack
  std::vector<Tensor> face_aux;           // T_a for the embedding attack
  const ds::ToySegmenter* segmenter = nullptr;
  const ds::ToyEmbedder* embedder = nullptr;
};

struct TrainLoopConfig {
  long steps = 600;
  long batch = 8;
  long aux_batch = 4;
  double lr = 1e-4;
  long log_every = 25;
};

struct AttackLogRow {
  long step = 0;
  std::string objective;
  double joint = 0.0;
  double stealth = 0.0;
  double clean_bpp = 0.0;
  double attack_term = 0.0;
};

struct AttackTrainResult {
  codec::CodecModel model;
  std::vector<AttackLogRow> log;
};

// Stage 1: joint optimization of the encoder and the trigger generators.
// Decoder and entropy parameters stay bit-identical to the vanilla model.
// triggers[i] is trained against objectives[i].
AttackTrainResult stage1_train(const codec::CodecModel& vanilla,
                               const std::vector<std::shared_ptr<trig::TriggerFn>>& triggers,
                               const std::vector<ObjectiveSpec>& objectives,
                               const AttackData& data, const TrainLoopConfig& cfg,
                               uint64_t seed);

// Stage 2: encoder-only hardening. Each step samples a preprocessing (or the
// identity) and applies it only inside the attack-objective term; trigger
// parameters are not touched.
AttackTrainResult stage2_train(const codec::CodecModel& stage1,
                               const std::vector<std::shared_ptr<trig::TriggerFn>>& triggers,
                               const std::vector<ObjectiveSpec>& objectives,
                               const std::vector<sens::DegreeDist>& prep_set,
                               const AttackData& data, const TrainLoopConfig& cfg,
                               uint64_t seed);

// Decoder-finetuning variant: encoder and entropy frozen. The BPP objective
// is rejected (rate is fixed before the decoder runs).
AttackTrainResult decoder_attack_train(const codec::CodecModel& vanilla,
                                       const std::shared_ptr<trig::TriggerFn>& trigger,
                                       const ObjectiveSpec& objective, const AttackData& data,
                                       const TrainLoopConfig& cfg, uint64_t seed);

}  // namespace lict::atk
