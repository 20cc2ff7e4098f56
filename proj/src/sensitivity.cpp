#include "lict/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lict::sens {

DegreeDist mild_filter_dist() { return {prep::Kind::GaussianFilter, {0.2, 0.4, 0.5, 0.6}}; }
DegreeDist mild_noise_dist() { return {prep::Kind::AdditiveNoise, {0.02, 0.04, 0.06}}; }
DegreeDist mild_jpeg_dist() { return {prep::Kind::Jpeg, {90, 70, 50}}; }

std::vector<DegreeDist> default_prep_set() {
  return {mild_filter_dist(), mild_noise_dist(), mild_jpeg_dist()};
}

Tensor pseudo_poison(const Tensor& x, const Tensor& mT, const Tensor& w,
                     const dct::MidBand& band, long patch) {
  check_image(x, "pseudo_poison");
  if (mT.ndim() != 2 || mT.extent(0) != 3 || mT.extent(1) != band.length)
    throw std::invalid_argument("pseudo_poison: mT must be [3,N]");
  for (long i = 0; i < mT.numel(); ++i)
    if (!(mT[i] > 0.0))
      throw std::invalid_argument("pseudo_poison: mT must be strictly positive on the band");
  auto freq = dct::dct2(dct::split_patches(x, patch));
  if (w.numel() != freq.num_patches())
    throw std::invalid_argument("pseudo_poison: w must have one entry per patch");
  Tensor grid = dct::embed_midband(mT, band, patch);
  const long pp = patch * patch;
  for (long c = 0; c < 3; ++c)
    for (long p = 0; p < freq.num_patches(); ++p) {
      const double wv = w[p];
      double* dst = freq.coeffs.data() + (c * freq.num_patches() + p) * pp;
      const double* g = grid.data() + c * pp;
      for (long i = 0; i < pp; ++i) dst[i] += g[i] * wv;
    }
  return dct::merge_patches(dct::idct2(freq));
}

Tensor sensitivity_component(const Tensor& pseudo_poisoned, const Tensor& mT, const Tensor& w,
                             const dct::MidBand& band, long patch, const DegreeDist& dist,
                             long samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("sensitivity_component: samples must be >= 1");
  auto ref = dct::dct2(dct::split_patches(pseudo_poisoned, patch));
  const long np = ref.num_patches();
  const long n = band.length;
  if (w.numel() != np) throw std::invalid_argument("sensitivity_component: bad w length");

  // mid-band reference coefficients per patch
  std::vector<Tensor> ref_mid((size_t)np);
  const long pp = patch * patch;
  for (long p = 0; p < np; ++p) {
    Tensor g({3, patch, patch});
    for (long c = 0; c < 3; ++c)
      std::copy(ref.coeffs.data() + (c * np + p) * pp, ref.coeffs.data() + (c * np + p + 1) * pp,
                g.data() + c * pp);
    ref_mid[(size_t)p] = dct::extract_midband(g, band, patch);
  }

  Tensor acc({3, n});
  for (long s = 0; s < samples; ++s) {
    prep::Spec spec;
    spec.kind = dist.kind;
    if (dist.kind != prep::Kind::Identity) {
      if (dist.degrees.empty())
        throw std::invalid_argument("sensitivity_component: empty degree distribution");
      spec.degree = dist.degrees[(size_t)rng.index((long)dist.degrees.size())];
    }
    spec.seed = rng.next_u64();
    Tensor proc = prep::apply(spec, pseudo_poisoned);
    auto got = dct::dct2(dct::split_patches(proc, patch));
    for (long p = 0; p < np; ++p) {
      Tensor g({3, patch, patch});
      for (long c = 0; c < 3; ++c)
        std::copy(got.coeffs.data() + (c * np + p) * pp,
                  got.coeffs.data() + (c * np + p + 1) * pp, g.data() + c * pp);
      Tensor got_mid = dct::extract_midband(g, band, patch);
      for (long c = 0; c < 3; ++c)
        for (long j = 0; j < n; ++j) {
          const double denom = std::max(kDenomFloor, std::fabs(mT.at(c, j) * w[p]));
          acc.at(c, j) += std::fabs((got_mid.at(c, j) - ref_mid[(size_t)p].at(c, j)) / denom);
        }
    }
  }
  for (long i = 0; i < acc.numel(); ++i) {
    acc[i] /= (double)samples;
    if (!std::isfinite(acc[i]))
      throw std::runtime_error("sensitivity_component: non-finite sensitivity entry");
  }
  return acc;
}

Tensor aggregate(const std::vector<Tensor>& components) {
  if (components.empty()) throw std::invalid_argument("aggregate: no components");
  Tensor out = components[0];
  for (size_t i = 1; i < components.size(); ++i) {
    if (!components[i].same_shape(out))
      throw std::invalid_argument("aggregate: component shape mismatch");
    for (long j = 0; j < out.numel(); ++j) out[j] *= components[i][j];
  }
  return out;
}

std::vector<std::vector<long>> rank_frequencies(const Tensor& map, long k) {
  if (map.ndim() != 2 || map.extent(0) != 3)
    throw std::invalid_argument("rank_frequencies: expected [3,N]");
  const long n = map.extent(1);
  if (k < 1 || k > n) throw std::invalid_argument("rank_frequencies: K out of range");
  std::vector<std::vector<long>> out(3);
  for (long c = 0; c < 3; ++c) {
    std::vector<long> idx((size_t)n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](long a, long b) { return map.at(c, a) < map.at(c, b); });
    out[(size_t)c].assign(idx.begin(), idx.begin() + k);
  }
  return out;
}

SensitivityEstimate estimate(const std::vector<Tensor>& images, const dct::MidBand& band,
                             long patch, const std::vector<DegreeDist>& preps, long samples,
                             double probe_magnitude, uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("sensitivity estimate: empty corpus");
  if (!(probe_magnitude > 0.0))
    throw std::invalid_argument("sensitivity estimate: probe magnitude must be positive");
  Tensor mT({3, band.length}, probe_magnitude);

  SensitivityEstimate est;
  est.sample_count = samples * (long)images.size();
  Rng root(seed);
  for (size_t pi = 0; pi < preps.size(); ++pi) {
    Tensor comp({3, band.length});
    for (size_t ii = 0; ii < images.size(); ++ii) {
      const Tensor& x = images[ii];
      auto grid = dct::split_patches(x, patch);
      Tensor w({grid.num_patches()}, 1.0);
      Tensor xp = pseudo_poison(x, mT, w, band, patch);
      Rng local = root.fork((uint64_t)(pi * 100003 + ii + 1));
      Tensor ci = sensitivity_component(xp, mT, w, band, patch, preps[pi], samples, local);
      for (long j = 0; j < comp.numel(); ++j) comp[j] += ci[j];
    }
    for (long j = 0; j < comp.numel(); ++j) comp[j] /= (double)images.size();
    est.components.push_back(std::move(comp));
  }
  est.map = aggregate(est.components);
  return est;
}

}  // namespace lict::sens
