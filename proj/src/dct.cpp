#include "lict/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "lict/kernels/kernels.hpp"

namespace lict::dct {

MidBand centered_band(long patch, long n) {
  return MidBand{(patch * patch - n) / 2, n};
}

void validate_band(const MidBand& band, long patch) {
  if (band.start < 0 || band.length < 0 || band.start + band.length > patch * patch)
    throw std::invalid_argument("mid-band out of range for patch size");
}

long reflect_index(long i, long size) {
  const long period = 2 * size;
  long m = i % period;
  if (m < 0) m += period;
  return m < size ? m : period - 1 - m;
}

BlockGrid split_patches(const Tensor& image, long patch) {
  if (patch < 2) throw std::invalid_argument("split_patches: patch size must be >= 2");
  if (image.ndim() != 3 || image.extent(0) != 3)
    throw std::invalid_argument("split_patches: expected [3,H,W] image");
  const long h = image.extent(1), w = image.extent(2);
  if (patch > h && patch > w)
    throw std::invalid_argument("split_patches: patch larger than both image dimensions");

  BlockGrid g;
  g.patch = patch;
  g.rows = (h + patch - 1) / patch;
  g.cols = (w + patch - 1) / patch;
  g.height = h;
  g.width = w;
  g.coeffs = Tensor({3, g.rows * g.cols, patch, patch});

  for (long c = 0; c < 3; ++c)
    for (long br = 0; br < g.rows; ++br)
      for (long bc = 0; bc < g.cols; ++bc) {
        const long p = br * g.cols + bc;
        for (long y = 0; y < patch; ++y) {
          const long sy = reflect_index(br * patch + y, h);
          for (long x = 0; x < patch; ++x) {
            const long sx = reflect_index(bc * patch + x, w);
            g.coeffs.at(c, p, y, x) = image.at(c, sy, sx);
          }
        }
      }
  return g;
}

static void check_grid(const BlockGrid& g) {
  if (g.patch < 2 || g.rows < 1 || g.cols < 1)
    throw std::invalid_argument("block grid: bad geometry");
  const auto& s = g.coeffs.shape();
  if (s.size() != 4 || s[0] != 3 || s[1] != g.rows * g.cols || s[2] != g.patch || s[3] != g.patch)
    throw std::invalid_argument("block grid: coefficient shape inconsistent with metadata");
  if (g.height < 1 || g.width < 1 || g.height > g.rows * g.patch || g.width > g.cols * g.patch)
    throw std::invalid_argument("block grid: original size inconsistent with grid");
}

Tensor merge_patches(const BlockGrid& g) {
  check_grid(g);
  Tensor image({3, g.height, g.width});
  for (long c = 0; c < 3; ++c)
    for (long br = 0; br < g.rows; ++br)
      for (long bc = 0; bc < g.cols; ++bc) {
        const long p = br * g.cols + bc;
        const long ylim = std::min(g.patch, g.height - br * g.patch);
        const long xlim = std::min(g.patch, g.width - bc * g.patch);
        for (long y = 0; y < ylim; ++y)
          for (long x = 0; x < xlim; ++x)
            image.at(c, br * g.patch + y, bc * g.patch + x) = g.coeffs.at(c, p, y, x);
      }
  return image;
}

Tensor split_adjoint(const BlockGrid& g) {
  check_grid(g);
  Tensor image({3, g.height, g.width});
  for (long c = 0; c < 3; ++c)
    for (long br = 0; br < g.rows; ++br)
      for (long bc = 0; bc < g.cols; ++bc) {
        const long p = br * g.cols + bc;
        for (long y = 0; y < g.patch; ++y) {
          const long sy = reflect_index(br * g.patch + y, g.height);
          for (long x = 0; x < g.patch; ++x) {
            const long sx = reflect_index(bc * g.patch + x, g.width);
            image.at(c, sy, sx) += g.coeffs.at(c, p, y, x);
          }
        }
      }
  return image;
}

const Tensor& dct_matrix(long patch) {
  static std::map<long, Tensor> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(patch);
  if (it != cache.end()) return it->second;
  Tensor m({patch, patch});
  const double pi = 3.14159265358979323846;
  for (long u = 0; u < patch; ++u) {
    const double a = u == 0 ? std::sqrt(1.0 / patch) : std::sqrt(2.0 / patch);
    for (long x = 0; x < patch; ++x)
      m.at(u, x) = a * std::cos(pi * (2 * x + 1) * u / (2.0 * patch));
  }
  return cache.emplace(patch, std::move(m)).first->second;
}

// out = C * block * C^T if forward, else C^T * block * C.
static BlockGrid transform(const BlockGrid& in, bool forward) {
  check_grid(in);
  const long p = in.patch;
  const Tensor& c = dct_matrix(p);
  BlockGrid out = in;
  const auto& k = kernels::ops();
  const long nblocks = 3 * in.num_patches();
  std::vector<double> tmp((size_t)(p * p));
  for (long b = 0; b < nblocks; ++b) {
    const double* src = in.coeffs.data() + b * p * p;
    double* dst = out.coeffs.data() + b * p * p;
    if (forward) {
      // tmp = C * src ; dst = tmp * C^T
      k.gemm(c.data(), src, tmp.data(), p, p, p, false);
      k.gemm_nt(tmp.data(), c.data(), dst, p, p, p, false);
    } else {
      // tmp = C^T * src ; dst = tmp * C
      k.gemm_tn(c.data(), src, tmp.data(), p, p, p, false);
      k.gemm(tmp.data(), c.data(), dst, p, p, p, false);
    }
  }
  return out;
}

BlockGrid dct2(const BlockGrid& blocks) { return transform(blocks, true); }
BlockGrid idct2(const BlockGrid& coeffs) { return transform(coeffs, false); }

const std::vector<long>& zigzag_order(long patch) {
  static std::map<long, std::vector<long>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(patch);
  if (it != cache.end()) return it->second;
  if (patch < 2) throw std::invalid_argument("zigzag_order: patch size must be >= 2");
  std::vector<long> order;
  order.reserve(patch * patch);
  for (long d = 0; d <= 2 * (patch - 1); ++d) {
    if (d % 2 == 0) {
      // up-right: start at the lowest row on this anti-diagonal
      for (long i = std::min(d, patch - 1); i >= std::max<long>(0, d - patch + 1); --i)
        order.push_back(i * patch + (d - i));
    } else {
      // down-left
      for (long i = std::max<long>(0, d - patch + 1); i <= std::min(d, patch - 1); ++i)
        order.push_back(i * patch + (d - i));
    }
  }
  return cache.emplace(patch, std::move(order)).first->second;
}

Tensor embed_midband(const Tensor& mid_values, const MidBand& band, long patch) {
  validate_band(band, patch);
  if (mid_values.ndim() != 2 || mid_values.extent(0) != 3 || mid_values.extent(1) != band.length)
    throw std::invalid_argument("embed_midband: values must be [3,N] matching the band");
  const auto& zz = zigzag_order(patch);
  Tensor grid({3, patch, patch});
  for (long c = 0; c < 3; ++c)
    for (long j = 0; j < band.length; ++j)
      grid.data()[c * patch * patch + zz[band.start + j]] = mid_values.at(c, j);
  return grid;
}

Tensor extract_midband(const Tensor& grid, const MidBand& band, long patch) {
  validate_band(band, patch);
  if (grid.ndim() != 3 || grid.extent(0) != 3 || grid.extent(1) != patch || grid.extent(2) != patch)
    throw std::invalid_argument("extract_midband: grid must be [3,P,P]");
  const auto& zz = zigzag_order(patch);
  Tensor mid({3, band.length});
  for (long c = 0; c < 3; ++c)
    for (long j = 0; j < band.length; ++j)
      mid.at(c, j) = grid.data()[c * patch * patch + zz[band.start + j]];
  return mid;
}

}  // namespace lict::dct
