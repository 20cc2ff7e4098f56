#pragma once

#include <vector>

#include "lict/dct.hpp"
#include "lict/image.hpp"
#include "lict/preprocess.hpp"
#include "lict/rng.hpp"

namespace lict::sens {

// Uniform draw over a finite set of degrees for one preprocessing kind.
struct DegreeDist {
  prep::Kind kind = prep::Kind::Identity;
  std::vector<double> degrees;
};

// Mild/moderate estimation grids for the sensitivity oracle.
DegreeDist mild_filter_dist();  // sigma in {0.2,0.4,0.5,0.6}
DegreeDist mild_noise_dist();   // sigma in {0.02,0.04,0.06}
DegreeDist mild_jpeg_dist();    // quality in {90,70,50}
std::vector<DegreeDist> default_prep_set();

// Probe image with every mid-band frequency carrying signal:
// IDCT(DCT(x) + OR(mT) (.) w), unclamped. mT must be strictly positive.
Tensor pseudo_poison(const Tensor& x, const Tensor& mT, const Tensor& w,
                     const dct::MidBand& band, long patch);

// Average over `samples` degree draws of the per-frequency absolute relative
// coefficient change, summed over patches:
//   I_i = InverseOR(sum_p |(DCT(t(x_p)) - DCT(x_p)) / (OR(mT) (.) w)|)
// The denominator is floored at kDenomFloor.
inline constexpr double kDenomFloor = 1e-6;
Tensor sensitivity_component(const Tensor& pseudo_poisoned, const Tensor& mT, const Tensor& w,
                             const dct::MidBand& band, long patch, const DegreeDist& dist,
                             long samples, Rng& rng);

// Elementwise product of the per-preprocess components.
Tensor aggregate(const std::vector<Tensor>& components);

// Indices of the K smallest-sensitivity frequencies per channel, ascending,
// ties toward the lower index.
std::vector<std::vector<long>> rank_frequencies(const Tensor& map, long k);

struct SensitivityEstimate {
  Tensor map;                      // [3,N] product map
  std::vector<Tensor> components;  // one [3,N] per preprocessing kind
  long sample_count = 0;
};

// Full oracle over an image corpus: per kind, average components over images
// and degree draws, then multiply across kinds.
SensitivityEstimate estimate(const std::vector<Tensor>& images, const dct::MidBand& band,
                             long patch, const std::vector<DegreeDist>& preps, long samples,
                             double probe_magnitude, uint64_t seed);

}  // namespace lict::sens
