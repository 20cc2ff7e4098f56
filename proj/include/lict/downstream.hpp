#pragma once

#include <vector>

#include "lict/image.hpp"
#include "lict/nn.hpp"

namespace lict::ds {

using ag::Var;

// Synthetic shapes corpus classes.
inline constexpr long kBackground = 0;
inline constexpr long kCircle = 1;    // source class s
inline constexpr long kSquare = 2;    // target class t
inline constexpr long kTriangle = 3;  // unwanted class u
inline constexpr long kNumClasses = 4;

struct LabelMap {
  std::vector<long> ids;  // row-major [H,W]
  long h = 0, w = 0;
  long at(long y, long x) const { return ids[(size_t)(y * w + x)]; }
  long& at(long y, long x) { return ids[(size_t)(y * w + x)]; }
};

struct ShapesSample {
  Tensor image;
  LabelMap labels;
};

// Colored geometric shapes on a textured background; every circle pixel is
// labeled kCircle, squares kSquare, triangles kTriangle.
std::vector<ShapesSample> synth_shapes_dataset(long n, long size, uint64_t seed);

// M = 1 exactly where labels == source; [H,W] tensor of {0,1}.
Tensor make_mask(const LabelMap& labels, long source);
// eta: labels with source -> target.
LabelMap make_target(const LabelMap& labels, long source, long target);
// tau: eta with target -> unwanted.
LabelMap make_unwanted(const LabelMap& eta, long target, long unwanted);

struct ToySegmenter {
  long width = 24;
  nn::Conv2d c1, c2, c3;
  nn::ConvT2d up;
  nn::Conv2d head;

  static ToySegmenter create(long width, uint64_t seed);
  Var logits(Var x) const;  // [N,4,H,W]
  LabelMap predict(const Tensor& image) const;
  nn::ParamDict params() const;
  long param_count() const;
};

struct ToyEmbedder {
  nn::Conv2d e1, e2, e3;
  nn::Linear head;  // -> 64-dim, then L2 normalization

  static ToyEmbedder create(uint64_t seed);
  Var embed(Var x) const;  // [N,64], unit norm rows
  Tensor embed_eval(const Tensor& image) const;
  nn::ParamDict params() const;
};

// Identity corpus for the embedder: a few synthetic identities with jittered
// samples per identity.
struct FaceSample {
  Tensor image;
  long identity = 0;
};
std::vector<FaceSample> synth_faces_dataset(long n_ids, long per_id, long size, uint64_t seed);

struct SegTrainResult {
  ToySegmenter model;
  double holdout_accuracy = 0.0;
};
SegTrainResult train_segmenter(const std::vector<ShapesSample>& corpus, long width, long steps,
                               uint64_t seed);

struct EmbedTrainResult {
  ToyEmbedder model;
  double holdout_same_cos = 0.0;
  double holdout_diff_cos = 0.0;
};
EmbedTrainResult train_embedder(const std::vector<FaceSample>& corpus, long n_ids, long steps,
                                uint64_t seed);

double pixel_accuracy(const ToySegmenter& seg, const std::vector<ShapesSample>& samples);

}  // namespace lict::ds
