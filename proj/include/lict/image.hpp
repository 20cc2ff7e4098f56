#pragma once

#include <cmath>
#include <vector>

#include "lict/tensor.hpp"

namespace lict {

// An image is a [3,H,W] tensor with values in [0,1].
using Image = Tensor;

inline void check_image(const Tensor& img, const char* who) {
  if (img.ndim() != 3 || img.extent(0) != 3)
    throw std::invalid_argument(std::string(who) + ": expected [3,H,W] image");
}

inline double mse(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
  double s = 0.0;
  for (long i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / (double)a.numel();
}

// PSNR on the [0,1] scale, capped at 100 dB for (near-)zero error.
inline double psnr_from_mse(double m) {
  if (m < 1e-10) return 100.0;
  return -10.0 * std::log10(m);
}

inline double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse(a, b)); }

inline void clamp01_inplace(Tensor& t) {
  for (long i = 0; i < t.numel(); ++i) t[i] = std::min(1.0, std::max(0.0, t[i]));
}

// Project-wide rounding convention: half away from zero.
inline double round_half_away(double v) { return std::round(v); }

inline Tensor stack_images(const std::vector<Tensor>& images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  std::vector<long> shape{(long)images.size()};
  for (long d : images[0].shape()) shape.push_back(d);
  Tensor out(shape);
  const long stride = images[0].numel();
  for (size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(images[0]))
      throw std::invalid_argument("stack_images: shape mismatch");
    std::copy(images[i].data(), images[i].data() + stride, out.data() + (long)i * stride);
  }
  return out;
}

inline Tensor slice_image(const Tensor& batch, long n) {
  std::vector<long> shape(batch.shape().begin() + 1, batch.shape().end());
  Tensor out(shape);
  std::copy(batch.data() + n * out.numel(), batch.data() + (n + 1) * out.numel(), out.data());
  return out;
}

}  // namespace lict
