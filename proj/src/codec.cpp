#include "lict/codec.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lict::codec {

using namespace lict::ag;

std::string Arch::descriptor() const {
  std::ostringstream os;
  os << (entropy == EntropyKind::Hyperprior ? "hyperprior" : "factorized") << ":h" << hidden
     << ":m" << latent << ":hh" << hyper_hidden << ":hz" << hyper_latent << ":s" << stages;
  return os.str();
}

Arch Arch::from_descriptor(const std::string& s) {
  Arch a;
  std::istringstream is(s);
  std::string tok;
  if (!std::getline(is, tok, ':')) throw std::invalid_argument("bad arch descriptor: " + s);
  if (tok == "hyperprior")
    a.entropy = EntropyKind::Hyperprior;
  else if (tok == "factorized")
    a.entropy = EntropyKind::Factorized;
  else
    throw std::invalid_argument("bad arch descriptor: " + s);
  while (std::getline(is, tok, ':')) {
    if (tok.rfind("hh", 0) == 0)
      a.hyper_hidden = std::stol(tok.substr(2));
    else if (tok.rfind("hz", 0) == 0)
      a.hyper_latent = std::stol(tok.substr(2));
    else if (tok.rfind('h', 0) == 0)
      a.hidden = std::stol(tok.substr(1));
    else if (tok.rfind('m', 0) == 0)
      a.latent = std::stol(tok.substr(1));
    else if (tok.rfind('s', 0) == 0)
      a.stages = std::stol(tok.substr(1));
    else
      throw std::invalid_argument("bad arch descriptor token: " + tok);
  }
  return a;
}

// ---------------------------------------------------------------------------
// factorized prior

FactorizedPrior::FactorizedPrior(long c, Rng& rng) : channels(c) {
  const long w = width;
  const double scale = std::cbrt(10.0);
  auto mat_init = [&](std::vector<long> shape, long fan_out) {
    const double v = std::log(std::expm1(1.0 / (scale * (double)fan_out)));
    return parameter(Tensor(std::move(shape), v));
  };
  auto bias_init = [&](std::vector<long> shape) {
    Tensor t(std::move(shape));
    for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-0.5, 0.5);
    return parameter(std::move(t));
  };
  m1 = mat_init({c, w, 1}, w);
  b1 = bias_init({c, w, 1});
  a1 = parameter(Tensor({c, w, 1}));
  m2 = mat_init({c, w, w}, w);
  b2 = bias_init({c, w, 1});
  a2 = parameter(Tensor({c, w, 1}));
  m3 = mat_init({c, 1, w}, 1);
  b3 = bias_init({c, 1, 1});
}

Var FactorizedPrior::cdf(Var u) const {
  // layer 1: [C,w,1] acting on [C,1,M]
  Var h = add(mul(softplus(m1), u), b1);
  h = add(h, mul(tanh_(a1), tanh_(h)));
  // layer 2
  h = add(bmm(softplus(m2), h), b2);
  h = add(h, mul(tanh_(a2), tanh_(h)));
  // final monotone layer + sigmoid
  h = add(bmm(softplus(m3), h), b3);
  return sigmoid(h);
}

Var FactorizedPrior::bits(Var values) const {
  const auto& s = values->v.shape();
  if (s.size() != 4 || s[1] != channels)
    throw std::invalid_argument("FactorizedPrior::bits: expected [N,C,h,w] with C=channels");
  const long n = s[0], hh = s[2], ww = s[3];
  Var per_channel = reshape(permute(values, {1, 0, 2, 3}), {channels, 1, n * hh * ww});
  Var p = sub(cdf(offset(per_channel, 0.5)), cdf(offset(per_channel, -0.5)));
  Var bits = scale(log_(clamp_min(p, kProbFloor)), -1.0 / std::log(2.0));
  return permute(reshape(bits, {channels, n, hh, ww}), {1, 0, 2, 3});
}

nn::ParamDict FactorizedPrior::params(const std::string& name) const {
  nn::ParamDict d;
  d.add(name + ".m1", m1);
  d.add(name + ".b1", b1);
  d.add(name + ".a1", a1);
  d.add(name + ".m2", m2);
  d.add(name + ".b2", b2);
  d.add(name + ".a2", a2);
  d.add(name + ".m3", m3);
  d.add(name + ".b3", b3);
  return d;
}

Var gaussian_bits(Var values, Var sigma) {
  const double inv_sqrt2 = 0.7071067811865476;
  Var denom = scale(std::move(sigma), 1.0 / inv_sqrt2);  // sigma * sqrt(2)
  Var hi = erf_(div(offset(values, 0.5), denom));
  Var lo = erf_(div(offset(values, -0.5), denom));
  Var p = scale(sub(hi, lo), 0.5);
  return scale(log_(clamp_min(p, kProbFloor)), -1.0 / std::log(2.0));
}

// ---------------------------------------------------------------------------
// model

CodecModel CodecModel::create(const Arch& arch, double lambda, uint64_t seed) {
  if (arch.stages != 4)
    throw std::invalid_argument("CodecModel: this transform is built with 4 stride-2 stages");
  if (lambda <= 0.0) throw std::invalid_argument("CodecModel: lambda must be positive");
  Rng rng(seed);
  CodecModel m;
  m.arch = arch;
  m.lambda = lambda;
  const long h = arch.hidden, lat = arch.latent;
  m.ea1 = nn::Conv2d(3, h, 3, 2, 1, rng);
  m.ea2 = nn::Conv2d(h, h, 3, 2, 1, rng);
  m.ea3 = nn::Conv2d(h, h, 3, 2, 1, rng);
  m.ea4 = nn::Conv2d(h, lat, 3, 2, 1, rng);
  m.ds1 = nn::ConvT2d(lat, h, 4, 2, 1, rng);
  m.ds2 = nn::ConvT2d(h, h, 4, 2, 1, rng);
  m.ds3 = nn::ConvT2d(h, h, 4, 2, 1, rng);
  m.ds4 = nn::ConvT2d(h, 3, 4, 2, 1, rng);
  // reconstructions start mid-range so the output clamp passes gradients
  m.ds4.b->v.fill(0.5);
  if (arch.entropy == EntropyKind::Factorized) {
    m.y_prior = FactorizedPrior(lat, rng);
  } else {
    const long hh = arch.hyper_hidden, hz = arch.hyper_latent;
    m.ha1 = nn::Conv2d(lat, hh, 3, 1, 1, rng);
    m.ha2 = nn::Conv2d(hh, hh, 3, 2, 1, rng);
    m.ha3 = nn::Conv2d(hh, hz, 3, 2, 1, rng);
    m.hs1 = nn::ConvT2d(hz, hh, 4, 2, 1, rng);
    m.hs2 = nn::ConvT2d(hh, hh, 4, 2, 1, rng);
    m.hs3 = nn::Conv2d(hh, lat, 3, 1, 1, rng);
    m.z_prior = FactorizedPrior(hz, rng);
  }
  return m;
}

namespace {
void copy_params(const nn::ParamDict& src, const nn::ParamDict& dst) {
  if (src.items.size() != dst.items.size()) throw std::logic_error("copy_params: mismatch");
  for (size_t i = 0; i < src.items.size(); ++i) dst.items[i].second->v = src.items[i].second->v;
}
}  // namespace

CodecModel CodecModel::clone() const {
  CodecModel m = create(arch, lambda, 0);
  copy_params(all_params(), m.all_params());
  return m;
}

void CodecModel::validate_input(long h, long w) const {
  const long s = arch.total_stride();
  if (h < s || w < s)
    throw std::invalid_argument("codec: image smaller than the total stride of the encoder");
  if (h % s != 0 || w % s != 0)
    throw std::invalid_argument("codec: image dims must be multiples of the total stride");
}

Var CodecModel::encode(Var x) const {
  const auto& s = x->v.shape();
  if (s.size() != 4 || s[1] != 3) throw std::invalid_argument("encode: expected [N,3,H,W]");
  validate_input(s[2], s[3]);
  const double slope = 0.1;
  Var h = leaky_relu(ea1(x), slope);
  h = leaky_relu(ea2(h), slope);
  h = leaky_relu(ea3(h), slope);
  return ea4(h);
}

Var CodecModel::decode(Var y_hat) const {
  const auto& s = y_hat->v.shape();
  if (s.size() != 4 || s[1] != arch.latent)
    throw std::invalid_argument("decode: latent shape inconsistent with model");
  const double slope = 0.1;
  Var h = leaky_relu(ds1(y_hat), slope);
  h = leaky_relu(ds2(h), slope);
  h = leaky_relu(ds3(h), slope);
  return clamp(ds4(h), 0.0, 1.0);
}

Var CodecModel::hyper_encode(Var y) const {
  const double slope = 0.1;
  Var h = leaky_relu(ha1(abs_(y)), slope);
  h = leaky_relu(ha2(h), slope);
  return ha3(h);
}

Var CodecModel::sigma_of(Var z_hat) const {
  const double slope = 0.1;
  Var h = leaky_relu(hs1(z_hat), slope);
  h = leaky_relu(hs2(h), slope);
  return offset(softplus(hs3(h)), 0.05);
}

Var CodecModel::total_bits(Var y_quantized, std::optional<Var> z_quantized) const {
  if (arch.entropy == EntropyKind::Factorized) {
    return sum(y_prior.bits(y_quantized));
  }
  if (!z_quantized) throw std::invalid_argument("total_bits: hyperprior model needs z");
  Var sigma = sigma_of(*z_quantized);
  Var y_bits = sum(gaussian_bits(y_quantized, sigma));
  Var z_bits = sum(z_prior.bits(*z_quantized));
  return add(y_bits, z_bits);
}

RdParts CodecModel::rd_loss(Var x, Rng& noise_rng) const {
  const auto& s = x->v.shape();
  const long npix = s[0] * s[2] * s[3];
  Var y = encode(x);
  Tensor noise(y->v.shape());
  for (long i = 0; i < noise.numel(); ++i) noise[i] = noise_rng.uniform(-0.5, 0.5);
  Var y_noisy = add(y, constant(std::move(noise)));

  Var bits;
  if (arch.entropy == EntropyKind::Hyperprior) {
    Var z = hyper_encode(y);
    Tensor znoise(z->v.shape());
    for (long i = 0; i < znoise.numel(); ++i) znoise[i] = noise_rng.uniform(-0.5, 0.5);
    Var z_noisy = add(z, constant(std::move(znoise)));
    bits = total_bits(y_noisy, z_noisy);
  } else {
    bits = total_bits(y_noisy, std::nullopt);
  }

  RdParts parts;
  parts.bpp = scale(bits, 1.0 / (double)npix);
  parts.dist = mse(decode(y_noisy), x);
  parts.loss = add(parts.bpp, scale(parts.dist, train_lambda()));
  return parts;
}

nn::ParamDict CodecModel::encoder_params() const {
  nn::ParamDict out;
  out.add("ea1.w", ea1.w);
  out.add("ea1.b", ea1.b);
  out.add("ea2.w", ea2.w);
  out.add("ea2.b", ea2.b);
  out.add("ea3.w", ea3.w);
  out.add("ea3.b", ea3.b);
  out.add("ea4.w", ea4.w);
  out.add("ea4.b", ea4.b);
  return out;
}

nn::ParamDict CodecModel::decoder_params() const {
  nn::ParamDict out;
  out.add("ds1.w", ds1.w);
  out.add("ds1.b", ds1.b);
  out.add("ds2.w", ds2.w);
  out.add("ds2.b", ds2.b);
  out.add("ds3.w", ds3.w);
  out.add("ds3.b", ds3.b);
  out.add("ds4.w", ds4.w);
  out.add("ds4.b", ds4.b);
  return out;
}

nn::ParamDict CodecModel::entropy_params() const {
  nn::ParamDict out;
  if (arch.entropy == EntropyKind::Factorized) {
    for (auto& kv : y_prior.params("yprior").items) out.items.push_back(kv);
    return out;
  }
  out.add("ha1.w", ha1.w);
  out.add("ha1.b", ha1.b);
  out.add("ha2.w", ha2.w);
  out.add("ha2.b", ha2.b);
  out.add("ha3.w", ha3.w);
  out.add("ha3.b", ha3.b);
  out.add("hs1.w", hs1.w);
  out.add("hs1.b", hs1.b);
  out.add("hs2.w", hs2.w);
  out.add("hs2.b", hs2.b);
  out.add("hs3.w", hs3.w);
  out.add("hs3.b", hs3.b);
  for (auto& kv : z_prior.params("zprior").items) out.items.push_back(kv);
  return out;
}

nn::ParamDict CodecModel::all_params() const {
  nn::ParamDict out = encoder_params();
  for (auto& kv : decoder_params().items) out.items.push_back(kv);
  for (auto& kv : entropy_params().items) out.items.push_back(kv);
  return out;
}

// ---------------------------------------------------------------------------
// eval API

Tensor quantize_noise(const Tensor& y, Rng& rng) {
  Tensor out = y;
  for (long i = 0; i < out.numel(); ++i) out[i] += rng.uniform(-0.5, 0.5);
  return out;
}

Tensor quantize_round(const Tensor& y) {
  Tensor out = y;
  for (long i = 0; i < out.numel(); ++i) out[i] = round_half_away(out[i]);
  return out;
}

namespace {
Var as_batch(const Tensor& image) {
  check_image(image, "codec");
  return constant(image.reshaped({1, 3, image.extent(1), image.extent(2)}));
}
}  // namespace

Tensor encode_eval(const CodecModel& m, const Tensor& image) {
  Var y = m.encode(as_batch(image));
  const auto& s = y->v.shape();
  return y->v.reshaped({s[1], s[2], s[3]});
}

Tensor decode_eval(const CodecModel& m, const Tensor& latent) {
  if (latent.ndim() != 3) throw std::invalid_argument("decode_eval: expected [C,h,w] latent");
  Var x = m.decode(constant(latent.reshaped({1, latent.extent(0), latent.extent(1),
                                             latent.extent(2)})));
  const auto& s = x->v.shape();
  return x->v.reshaped({s[1], s[2], s[3]});
}

RatePoint rate_eval(const CodecModel& m, const Tensor& image) {
  Var x = as_batch(image);
  Var y = m.encode(x);
  Var y_hat = constant(quantize_round(y->v));
  Var bits;
  if (m.arch.entropy == EntropyKind::Hyperprior) {
    Var z = m.hyper_encode(y);
    Var z_hat = constant(quantize_round(z->v));
    bits = m.total_bits(y_hat, z_hat);
  } else {
    bits = m.total_bits(y_hat, std::nullopt);
  }
  RatePoint rp;
  rp.bits = bits->v.item();
  rp.bpp = rp.bits / (double)(image.extent(1) * image.extent(2));
  // detect elements that hit the probability floor
  const double max_bits = -std::log2(kProbFloor) - 1e-6;
  Var per = (m.arch.entropy == EntropyKind::Factorized)
                ? m.y_prior.bits(y_hat)
                : gaussian_bits(y_hat, m.sigma_of(constant(quantize_round(
                                           m.hyper_encode(y)->v))));
  for (long i = 0; i < per->v.numel(); ++i)
    if (per->v[i] >= max_bits) {
      rp.floored = true;
      break;
    }
  return rp;
}

Tensor reconstruct_eval(const CodecModel& m, const Tensor& image) {
  Tensor y = encode_eval(m, image);
  return decode_eval(m, quantize_round(y));
}

RdPoint rd_eval(const CodecModel& m, const Tensor& image) {
  RdPoint p;
  p.bpp = rate_eval(m, image).bpp;
  Tensor rec = reconstruct_eval(m, image);
  p.mse = mse(rec, image);
  p.psnr = psnr_from_mse(p.mse);
  return p;
}

// ---------------------------------------------------------------------------
// vanilla training

TrainResult train_vanilla(const std::vector<Tensor>& dataset, const Arch& arch, double lambda,
                          const TrainConfig& cfg, uint64_t seed) {
  if (dataset.size() < 100)
    throw std::invalid_argument("train_vanilla: need at least 100 training images");
  Rng rng(seed);
  Rng noise_rng = rng.fork(1);
  Rng batch_rng = rng.fork(2);

  TrainResult res{CodecModel::create(arch, lambda, rng.fork(3).next_u64()), {}};
  CodecModel& model = res.model;
  nn::Adam opt(model.all_params().vars(), cfg.lr);

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();

  for (long step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> batch;
    batch.reserve(cfg.batch);
    for (long b = 0; b < cfg.batch; ++b) {
      if (cursor >= order.size()) {
        batch_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(dataset[order[cursor++]]);
    }
    Var x = constant(stack_images(batch));
    RdParts parts = model.rd_loss(x, noise_rng);
    const double lv = parts.loss->v.item();
    if (!std::isfinite(lv))
      throw std::runtime_error("train_vanilla: loss diverged (non-finite) at step " +
                               std::to_string(step));
    opt.zero_grad();
    ag::backward(parts.loss);
    opt.step();
    if (step % cfg.log_every == 0 || step == cfg.steps - 1)
      res.log.push_back({step, parts.bpp->v.item(), parts.dist->v.item(), lv});
  }
  return res;
}

}  // namespace lict::codec
