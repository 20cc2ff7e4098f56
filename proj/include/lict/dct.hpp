#pragma once

#include <vector>

#include "lict/tensor.hpp"

namespace lict::dct {

// Per-channel, per-patch P x P grids plus the geometry needed to undo the
// tiling. `coeffs` holds either spatial blocks or DCT coefficients depending
// on which transform stage produced it; shape is [3, rows*cols, P, P].
struct BlockGrid {
  Tensor coeffs;
  long patch = 0;
  long rows = 0;
  long cols = 0;
  long height = 0;  // original image size, before reflect padding
  long width = 0;

  long num_patches() const { return rows * cols; }
};

// Contiguous run of zigzag-ordered frequencies.
struct MidBand {
  long start = 0;
  long length = 0;
};

// Default band: centered run of `n` frequencies, [(P^2-n)/2, (P^2+n)/2).
MidBand centered_band(long patch, long n);

void validate_band(const MidBand& band, long patch);

// Mirror (symmetric) index for reflect padding; works for any pad size.
long reflect_index(long i, long size);

// Tile a [3,H,W] image into non-overlapping P x P blocks, reflect-padding the
// bottom/right edges up to a multiple of P.
BlockGrid split_patches(const Tensor& image, long patch);

// Exact inverse of split_patches: drops padded rows/cols.
Tensor merge_patches(const BlockGrid& blocks);

// Orthonormal type-II 2D DCT applied to every block of every channel.
BlockGrid dct2(const BlockGrid& blocks);
BlockGrid idct2(const BlockGrid& coeffs);

// Orthonormal DCT basis matrix C, C[u][x] = a(u) cos(pi (2x+1) u / 2P).
const Tensor& dct_matrix(long patch);

// Zigzag traversal of a P x P grid as linear indices (row*P + col),
// anti-diagonals with alternating direction, starting at (0,0).
const std::vector<long>& zigzag_order(long patch);

// Place mid_values[c][j] at zigzag position band.start + j of a P x P grid;
// everything outside the band is zero. mid_values: [3, band.length].
Tensor embed_midband(const Tensor& mid_values, const MidBand& band, long patch);

// Inverse of embed_midband: gather the band back out of a [3,P,P] grid.
Tensor extract_midband(const Tensor& grid, const MidBand& band, long patch);

// Adjoint of split_patches as a plain linear map: scatter block-domain
// values back onto a [3,H,W] image, accumulating reflected duplicates.
Tensor split_adjoint(const BlockGrid& blocks);

}  // namespace lict::dct
