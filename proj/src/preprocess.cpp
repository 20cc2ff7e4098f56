#include "lict/preprocess.hpp"

#include <cmath>
#include <stdexcept>

#include "lict/dct.hpp"
#include "lict/image_io.hpp"
#include "lict/rng.hpp"

namespace lict::prep {

Tensor gaussian_filter(const Tensor& x, double sigma) {
  check_image(x, "gaussian_filter");
  if (sigma < 0.0) throw std::invalid_argument("gaussian_filter: sigma must be >= 0");
  if (sigma == 0.0) return x;

  const long r = (long)std::ceil(3.0 * sigma);
  std::vector<double> k((size_t)(2 * r + 1));
  double s = 0.0;
  for (long i = -r; i <= r; ++i) {
    k[(size_t)(i + r)] = std::exp(-0.5 * (double)(i * i) / (sigma * sigma));
    s += k[(size_t)(i + r)];
  }
  for (auto& v : k) v /= s;

  const long h = x.extent(1), w = x.extent(2);
  Tensor tmp({3, h, w});
  Tensor out({3, h, w});
  // separable passes with reflect boundary
  for (long c = 0; c < 3; ++c)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (long i = -r; i <= r; ++i)
          acc += k[(size_t)(i + r)] * x.at(c, y, dct::reflect_index(xx + i, w));
        tmp.at(c, y, xx) = acc;
      }
  for (long c = 0; c < 3; ++c)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (long i = -r; i <= r; ++i)
          acc += k[(size_t)(i + r)] * tmp.at(c, dct::reflect_index(y + i, h), xx);
        out.at(c, y, xx) = acc;
      }
  return out;
}

Tensor additive_noise(const Tensor& x, double sigma, uint64_t seed) {
  check_image(x, "additive_noise");
  if (sigma < 0.0) throw std::invalid_argument("additive_noise: sigma must be >= 0");
  if (sigma == 0.0) return x;
  Rng rng(seed);
  Tensor out = x;
  for (long i = 0; i < out.numel(); ++i) out[i] += sigma * rng.normal();
  clamp01_inplace(out);
  return out;
}

Tensor jpeg(const Tensor& x, int quality) { return io::jpeg_roundtrip(x, quality); }

Tensor squeeze_bits(const Tensor& x, int depth) {
  check_image(x, "squeeze_bits");
  if (depth < 1 || depth > 8) throw std::invalid_argument("squeeze_bits: depth must be in 1..8");
  const double levels = (double)((1 << depth) - 1);
  Tensor out = x;
  for (long i = 0; i < out.numel(); ++i)
    out[i] = round_half_away(out[i] * levels) / levels;
  return out;
}

Tensor apply(const Spec& spec, const Tensor& x) {
  switch (spec.kind) {
    case Kind::Identity:
      return x;
    case Kind::GaussianFilter:
      return gaussian_filter(x, spec.degree);
    case Kind::AdditiveNoise:
      return additive_noise(x, spec.degree, spec.seed);
    case Kind::Jpeg:
      return jpeg(x, (int)spec.degree);
    case Kind::SqueezeBits:
      return squeeze_bits(x, (int)spec.degree);
  }
  throw std::logic_error("preprocess: unknown kind");
}

Kind kind_from_string(const std::string& s) {
  if (s == "identity") return Kind::Identity;
  if (s == "gaussian_filter") return Kind::GaussianFilter;
  if (s == "additive_noise") return Kind::AdditiveNoise;
  if (s == "jpeg") return Kind::Jpeg;
  if (s == "squeeze_bits") return Kind::SqueezeBits;
  throw std::invalid_argument("unknown preprocess kind: " + s);
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::Identity: return "identity";
    case Kind::GaussianFilter: return "gaussian_filter";
    case Kind::AdditiveNoise: return "additive_noise";
    case Kind::Jpeg: return "jpeg";
    case Kind::SqueezeBits: return "squeeze_bits";
  }
  return "?";
}

const std::vector<double>& filter_sigma_grid() {
  static const std::vector<double> g{0.2, 0.4, 0.5, 0.6, 0.8, 1.0};
  return g;
}
const std::vector<double>& noise_sigma_grid() {
  static const std::vector<double> g{0.02, 0.04, 0.06, 0.08, 0.1};
  return g;
}
const std::vector<double>& jpeg_quality_grid() {
  static const std::vector<double> g{90, 70, 50, 30, 10};
  return g;
}
const std::vector<double>& squeeze_depth_grid() {
  static const std::vector<double> g{7, 6, 5, 4, 3};
  return g;
}

std::vector<Spec> preset_grid(Kind kind, uint64_t seed) {
  const std::vector<double>* degrees = nullptr;
  switch (kind) {
    case Kind::Identity: return {Spec{Kind::Identity, 0.0, seed}};
    case Kind::GaussianFilter: degrees = &filter_sigma_grid(); break;
    case Kind::AdditiveNoise: degrees = &noise_sigma_grid(); break;
    case Kind::Jpeg: degrees = &jpeg_quality_grid(); break;
    case Kind::SqueezeBits: degrees = &squeeze_depth_grid(); break;
  }
  std::vector<Spec> out;
  for (double d : *degrees) out.push_back(Spec{kind, d, seed});
  return out;
}

}  // namespace lict::prep
