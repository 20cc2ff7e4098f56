#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lict/dct.hpp"
#include "lict/rng.hpp"

using namespace lict;
using namespace lict::dct;

namespace {

Tensor random_image(long h, long w, Rng& rng) {
  Tensor img({3, h, w});
  for (long i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  return img;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (long i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("split_patches tiles exactly and reflect-pads ragged edges") {
  Rng rng(1);
  auto a = random_image(32, 32, rng);
  auto ga = split_patches(a, 16);
  CHECK(ga.rows == 2);
  CHECK(ga.cols == 2);
  CHECK(ga.num_patches() == 4);

  auto b = random_image(33, 32, rng);
  auto gb = split_patches(b, 16);
  CHECK(gb.rows == 3);
  CHECK(gb.cols == 2);
  CHECK(gb.num_patches() == 6);
  CHECK(gb.height == 33);
  CHECK(gb.width == 32);
  // padded row 33 mirrors row 32 (symmetric reflection)
  CHECK(gb.coeffs.at(0, 2 * gb.cols, 1, 0) == b.at(0, 32, 0));

  CHECK(max_abs_diff(merge_patches(ga), a) == 0.0);
  CHECK(max_abs_diff(merge_patches(gb), b) == 0.0);

  auto c = random_image(64, 64, rng);
  CHECK(max_abs_diff(merge_patches(split_patches(c, 16)), c) == 0.0);

  CHECK_THROWS_AS(split_patches(random_image(8, 8, rng), 16), std::invalid_argument);
  CHECK_THROWS_AS(split_patches(a, 1), std::invalid_argument);
}

TEST_CASE("merge_patches validates grid metadata") {
  Rng rng(2);
  auto img = random_image(16, 16, rng);
  auto g = split_patches(img, 16);
  CHECK(g.num_patches() == 1);
  CHECK(max_abs_diff(merge_patches(g), img) == 0.0);

  BlockGrid bad = g;
  bad.rows = 2;
  bad.cols = 2;  // metadata says 4 blocks, tensor has 1
  CHECK_THROWS_AS(merge_patches(bad), std::invalid_argument);
}

TEST_CASE("dct2 is orthonormal: DC scaling, Parseval, inverse pair") {
  Rng rng(3);
  Tensor img({3, 16, 16}, 0.5);
  auto coeffs = dct2(split_patches(img, 16));
  CHECK(coeffs.coeffs.at(0, 0, 0, 0) == doctest::Approx(8.0).epsilon(1e-12));
  double ac = 0.0;
  for (long c = 0; c < 3; ++c)
    for (long i = 0; i < 16; ++i)
      for (long j = 0; j < 16; ++j)
        if (i || j) ac = std::max(ac, std::fabs(coeffs.coeffs.at(c, 0, i, j)));
  CHECK(ac < 1e-12);

  auto x = random_image(16, 16, rng);
  auto g = split_patches(x, 16);
  auto f = dct2(g);
  double e_space = 0.0, e_freq = 0.0;
  for (long i = 0; i < g.coeffs.numel(); ++i) {
    e_space += g.coeffs[i] * g.coeffs[i];
    e_freq += f.coeffs[i] * f.coeffs[i];
  }
  CHECK(std::fabs(e_space - e_freq) / e_space < 1e-9);

  CHECK(max_abs_diff(idct2(f).coeffs, g.coeffs) < 1e-10);
}

TEST_CASE("idct2 inverse examples") {
  BlockGrid dc;
  dc.patch = 16;
  dc.rows = dc.cols = 1;
  dc.height = dc.width = 16;
  dc.coeffs = Tensor({3, 1, 16, 16});
  dc.coeffs.at(0, 0, 0, 0) = 8.0;
  auto sp = idct2(dc);
  for (long i = 0; i < 16; ++i)
    for (long j = 0; j < 16; ++j) CHECK(sp.coeffs.at(0, 0, i, j) == doctest::Approx(0.5));

  BlockGrid z = dc;
  z.coeffs.fill(0.0);
  auto zsp = idct2(z);
  for (long i = 0; i < zsp.coeffs.numel(); ++i) CHECK(zsp.coeffs[i] == 0.0);

  Rng rng(4);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    BlockGrid b = dc;
    for (long i = 0; i < b.coeffs.numel(); ++i) b.coeffs[i] = rng.uniform(-1.0, 1.0);
    worst = std::max(worst, max_abs_diff(idct2(dct2(b)).coeffs, b.coeffs));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("zigzag order: hand-enumerated prefixes and bijection") {
  auto z2 = zigzag_order(2);
  CHECK(z2 == std::vector<long>{0, 1, 2, 3});  // (0,0),(0,1),(1,0),(1,1)

  auto z4 = zigzag_order(4);
  // (0,0),(0,1),(1,0),(2,0),(1,1),(0,2)
  CHECK(z4[0] == 0);
  CHECK(z4[1] == 1);
  CHECK(z4[2] == 4);
  CHECK(z4[3] == 8);
  CHECK(z4[4] == 5);
  CHECK(z4[5] == 2);

  for (long p = 2; p <= 32; ++p) {
    auto z = zigzag_order(p);
    auto sorted = z;
    std::sort(sorted.begin(), sorted.end());
    std::vector<long> expect(p * p);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
  }
}

TEST_CASE("embed/extract mid-band are mutually inverse and band-confined") {
  MidBand band{0, 1};
  Tensor one({3, 1});
  one.at(0, 0) = 2.0;
  auto grid = embed_midband(one, band, 16);
  CHECK(grid.at(0, 0, 0) == 2.0);
  double rest = 0.0;
  for (long i = 1; i < grid.numel(); ++i) rest += std::fabs(grid[i]);
  CHECK(rest == 0.0);

  Rng rng(5);
  MidBand mid = centered_band(16, 64);
  CHECK(mid.start == 96);
  Tensor v({3, 64});
  for (long i = 0; i < v.numel(); ++i) v[i] = rng.uniform(-1.0, 1.0);
  auto g = embed_midband(v, mid, 16);
  auto back = extract_midband(g, mid, 16);
  CHECK(max_abs_diff(back, v) == 0.0);

  // embed never writes outside the band
  const auto& zz = zigzag_order(16);
  std::vector<bool> in_band(256, false);
  for (long j = 0; j < 64; ++j) in_band[(size_t)zz[mid.start + j]] = true;
  for (long c = 0; c < 3; ++c)
    for (long i = 0; i < 256; ++i)
      if (!in_band[(size_t)i]) CHECK(g[c * 256 + i] == 0.0);

  Tensor zeros({3, 64});
  auto zgrid = embed_midband(zeros, mid, 16);
  for (long i = 0; i < zgrid.numel(); ++i) CHECK(zgrid[i] == 0.0);

  CHECK_THROWS_AS(embed_midband(Tensor({3, 32}), mid, 16), std::invalid_argument);
  CHECK_THROWS_AS(extract_midband(Tensor({3, 16, 16}), MidBand{250, 10}, 16),
                  std::invalid_argument);
}

TEST_CASE("full pipeline round trip: merge(idct2(dct2(split(x)))) == x") {
  Rng rng(6);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    long h = 33 + (long)rng.index(64);
    long w = 33 + (long)rng.index(64);
    auto x = random_image(h, w, rng);
    auto back = merge_patches(idct2(dct2(split_patches(x, 16))));
    worst = std::max(worst, max_abs_diff(back, x));
  }
  CHECK(worst <= 1e-5);
}
