#pragma once

#include <string>
#include <vector>

#include "lict/image.hpp"

namespace lict::prep {

enum class Kind { Identity, GaussianFilter, AdditiveNoise, Jpeg, SqueezeBits };

// One preprocessing transform with its degree: sigma in pixels for the
// filter, intensity sigma for noise, quality in [1,100] for JPEG, and bit
// depth in {1..8} for squeezing.
struct Spec {
  Kind kind = Kind::Identity;
  double degree = 0.0;
  uint64_t seed = 0;
};

Tensor gaussian_filter(const Tensor& x, double sigma);
Tensor additive_noise(const Tensor& x, double sigma, uint64_t seed);
Tensor jpeg(const Tensor& x, int quality);
Tensor squeeze_bits(const Tensor& x, int depth);

Tensor apply(const Spec& spec, const Tensor& x);

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

// Degree grids mirroring the evaluation presets.
const std::vector<double>& filter_sigma_grid();   // {0.2,0.4,0.5,0.6,0.8,1.0}
const std::vector<double>& noise_sigma_grid();    // {0.02,0.04,0.06,0.08,0.1}
const std::vector<double>& jpeg_quality_grid();   // {90,70,50,30,10}
const std::vector<double>& squeeze_depth_grid();  // {7,6,5,4,3}
std::vector<Spec> preset_grid(Kind kind, uint64_t seed);

}  // namespace lict::prep
