#include "lict/downstream.hpp"

#include <cmath>
#include <stdexcept>

namespace lict::ds {

using namespace lict::ag;

// ---------------------------------------------------------------------------
// synthetic corpora

namespace {

// Smooth multi-octave value noise in [0,1]; spectra fall off with frequency
// like natural textures.
Tensor octave_texture(long size, Rng& rng, double base, double contrast) {
  Tensor out({3, size, size}, base);
  for (long cell = 4; cell <= size / 2; cell *= 2) {
    const double amp = contrast * 4.0 / (double)cell;
    const long gn = size / cell + 2;
    std::vector<double> grid((size_t)(3 * gn * gn));
    for (auto& v : grid) v = rng.uniform(-1.0, 1.0);
    for (long c = 0; c < 3; ++c)
      for (long y = 0; y < size; ++y)
        for (long x = 0; x < size; ++x) {
          const double fy = (double)y / (double)cell;
          const double fx = (double)x / (double)cell;
          const long y0 = (long)fy, x0 = (long)fx;
          const double ty = fy - (double)y0, tx = fx - (double)x0;
          auto g = [&](long yy, long xx) { return grid[(size_t)((c * gn + yy) * gn + xx)]; };
          const double v = (1 - ty) * ((1 - tx) * g(y0, x0) + tx * g(y0, x0 + 1)) +
                           ty * ((1 - tx) * g(y0 + 1, x0) + tx * g(y0 + 1, x0 + 1));
          out.at(c, y, x) += amp * v;
        }
  }
  clamp01_inplace(out);
  return out;
}

void paint(Tensor& img, LabelMap& lab, long y, long x, long cls, const double rgb[3], Rng& rng) {
  for (long c = 0; c < 3; ++c)
    img.at(c, y, x) = std::min(1.0, std::max(0.0, rgb[c] + 0.05 * rng.uniform(-1.0, 1.0)));
  lab.at(y, x) = cls;
}

}  // namespace

std::vector<ShapesSample> synth_shapes_dataset(long n, long size, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_shapes_dataset: n must be >= 1");
  Rng root(seed);
  std::vector<ShapesSample> out;
  out.reserve((size_t)n);
  for (long i = 0; i < n; ++i) {
    Rng rng = root.fork((uint64_t)i + 1);
    ShapesSample s;
    s.image = octave_texture(size, rng, 0.45, 0.5);
    s.labels.h = size;
    s.labels.w = size;
    s.labels.ids.assign((size_t)(size * size), kBackground);

    // draw a random subset of the three shapes
    std::vector<long> kinds{kCircle, kSquare, kTriangle};
    rng.shuffle(kinds);
    const long count = 1 + rng.index(3);
    for (long k = 0; k < count; ++k) {
      const long cls = kinds[(size_t)k];
      const long r = 8 + rng.index(7);
      const long cy = r + 2 + rng.index(size - 2 * r - 4);
      const long cx = r + 2 + rng.index(size - 2 * r - 4);
      double rgb[3] = {0.1, 0.1, 0.1};
      if (cls == kCircle) rgb[0] = 0.85;
      if (cls == kSquare) rgb[1] = 0.85;
      if (cls == kTriangle) rgb[2] = 0.85;
      for (long y = cy - r; y <= cy + r; ++y)
        for (long x = cx - r; x <= cx + r; ++x) {
          if (y < 0 || y >= size || x < 0 || x >= size) continue;
          bool inside = false;
          if (cls == kCircle)
            inside = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
          else if (cls == kSquare)
            inside = true;
          else {
            const double t = (double)(y - (cy - r)) / (double)(2 * r);
            inside = t >= 0.0 && t <= 1.0 && std::fabs((double)(x - cx)) <= t * (double)r;
          }
          if (inside) paint(s.image, s.labels, y, x, cls, rgb, rng);
        }
    }
    out.push_back(std::move(s));
  }
  return out;
}

Tensor make_mask(const LabelMap& labels, long source) {
  Tensor m({labels.h, labels.w});
  for (long i = 0; i < m.numel(); ++i) m[i] = labels.ids[(size_t)i] == source ? 1.0 : 0.0;
  return m;
}

LabelMap make_target(const LabelMap& labels, long source, long target) {
  if (source == target) throw std::invalid_argument("make_target: source == target");
  LabelMap eta = labels;
  for (auto& id : eta.ids)
    if (id == source) id = target;
  return eta;
}

LabelMap make_unwanted(const LabelMap& eta, long target, long unwanted) {
  if (target == unwanted) throw std::invalid_argument("make_unwanted: target == unwanted");
  LabelMap tau = eta;
  for (auto& id : tau.ids)
    if (id == target) id = unwanted;
  return tau;
}

// ---------------------------------------------------------------------------
// toy segmenter

ToySegmenter ToySegmenter::create(long width, uint64_t seed) {
  Rng rng(seed);
  ToySegmenter s;
  s.width = width;
  s.c1 = nn::Conv2d(3, width, 3, 1, 1, rng);
  s.c2 = nn::Conv2d(width, width, 3, 2, 1, rng);
  s.c3 = nn::Conv2d(width, width, 3, 1, 1, rng);
  s.up = nn::ConvT2d(width, width, 4, 2, 1, rng);
  s.head = nn::Conv2d(width, kNumClasses, 3, 1, 1, rng);
  return s;
}

Var ToySegmenter::logits(Var x) const {
  const double slope = 0.1;
  Var f1 = leaky_relu(c1(x), slope);
  Var f2 = leaky_relu(c2(f1), slope);
  Var f3 = leaky_relu(c3(f2), slope);
  Var u = leaky_relu(up(f3), slope);
  return head(add(u, f1));
}

LabelMap ToySegmenter::predict(const Tensor& image) const {
  check_image(image, "ToySegmenter::predict");
  const long h = image.extent(1), w = image.extent(2);
  Var lg = logits(constant(image.reshaped({1, 3, h, w})));
  LabelMap out;
  out.h = h;
  out.w = w;
  out.ids.resize((size_t)(h * w));
  for (long i = 0; i < h * w; ++i) {
    long best = 0;
    double bv = lg->v[i];
    for (long c = 1; c < kNumClasses; ++c) {
      const double v = lg->v[c * h * w + i];
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    out.ids[(size_t)i] = best;
  }
  return out;
}

nn::ParamDict ToySegmenter::params() const {
  nn::ParamDict d;
  d.add("c1.w", c1.w);
  d.add("c1.b", c1.b);
  d.add("c2.w", c2.w);
  d.add("c2.b", c2.b);
  d.add("c3.w", c3.w);
  d.add("c3.b", c3.b);
  d.add("up.w", up.w);
  d.add("up.b", up.b);
  d.add("head.w", head.w);
  d.add("head.b", head.b);
  return d;
}

long ToySegmenter::param_count() const {
  long n = 0;
  for (const auto& [name, v] : params().items) n += v->v.numel();
  return n;
}

double pixel_accuracy(const ToySegmenter& seg, const std::vector<ShapesSample>& samples) {
  long correct = 0, total = 0;
  for (const auto& s : samples) {
    LabelMap pred = seg.predict(s.image);
    for (size_t i = 0; i < pred.ids.size(); ++i) {
      correct += pred.ids[i] == s.labels.ids[i] ? 1 : 0;
      ++total;
    }
  }
  return (double)correct / (double)total;
}

SegTrainResult train_segmenter(const std::vector<ShapesSample>& corpus, long width, long steps,
                               uint64_t seed) {
  if (corpus.size() < 10) throw std::invalid_argument("train_segmenter: corpus too small");
  const size_t holdout = std::max<size_t>(1, corpus.size() / 5);
  const size_t ntrain = corpus.size() - holdout;
  Rng rng(seed);
  SegTrainResult res{ToySegmenter::create(width, rng.fork(1).next_u64()), 0.0};
  nn::Adam opt(res.model.params().vars(), 1e-3);
  Rng batch_rng = rng.fork(2);
  const long bsz = 8;
  for (long step = 0; step < steps; ++step) {
    std::vector<Tensor> imgs;
    std::vector<long> labels;
    for (long b = 0; b < bsz; ++b) {
      const auto& s = corpus[(size_t)batch_rng.index((long)ntrain)];
      imgs.push_back(s.image);
      labels.insert(labels.end(), s.labels.ids.begin(), s.labels.ids.end());
    }
    Var loss = nn::ce_map(res.model.logits(constant(stack_images(imgs))), labels);
    opt.zero_grad();
    backward(loss);
    opt.step();
  }
  std::vector<ShapesSample> ho(corpus.end() - (long)holdout, corpus.end());
  res.holdout_accuracy = pixel_accuracy(res.model, ho);
  if (res.holdout_accuracy < 0.9)
    throw std::runtime_error("train_segmenter: held-out pixel accuracy " +
                             std::to_string(res.holdout_accuracy) + " below the 0.90 bar");
  return res;
}

// ---------------------------------------------------------------------------
// toy embedder

ToyEmbedder ToyEmbedder::create(uint64_t seed) {
  Rng rng(seed);
  ToyEmbedder e;
  e.e1 = nn::Conv2d(3, 16, 3, 2, 1, rng);
  e.e2 = nn::Conv2d(16, 32, 3, 2, 1, rng);
  e.e3 = nn::Conv2d(32, 32, 3, 2, 1, rng);
  e.head = nn::Linear(32, 64, rng);
  return e;
}

Var ToyEmbedder::embed(Var x) const {
  const double slope = 0.1;
  Var h = leaky_relu(e1(x), slope);
  h = leaky_relu(e2(h), slope);
  h = leaky_relu(e3(h), slope);
  Var emb = head(nn::global_avg_pool(h));  // [N,64]
  Tensor ones({64, 1}, 1.0);
  Var norm = sqrt_(clamp_min(matmul(square(emb), constant(ones)), 1e-12));  // [N,1]
  return div(emb, norm);
}

Tensor ToyEmbedder::embed_eval(const Tensor& image) const {
  check_image(image, "ToyEmbedder::embed_eval");
  Var e = embed(constant(image.reshaped({1, 3, image.extent(1), image.extent(2)})));
  return e->v.reshaped({64});
}

nn::ParamDict ToyEmbedder::params() const {
  nn::ParamDict d;
  d.add("e1.w", e1.w);
  d.add("e1.b", e1.b);
  d.add("e2.w", e2.w);
  d.add("e2.b", e2.b);
  d.add("e3.w", e3.w);
  d.add("e3.b", e3.b);
  d.add("head.w", head.w);
  d.add("head.b", head.b);
  return d;
}

std::vector<FaceSample> synth_faces_dataset(long n_ids, long per_id, long size, uint64_t seed) {
  if (n_ids < 2 || per_id < 1) throw std::invalid_argument("synth_faces_dataset: bad sizes");
  Rng root(seed);
  std::vector<FaceSample> out;
  for (long id = 0; id < n_ids; ++id) {
    Rng proto_rng = root.fork((uint64_t)id + 1);
    Tensor proto = octave_texture(size, proto_rng, 0.5, 0.6);
    // identity-specific feature blobs
    const long eye_y = size / 3 + proto_rng.index(6);
    const long eye_dx = size / 5 + proto_rng.index(5);
    const long mouth_y = 2 * size / 3 + proto_rng.index(6);
    double tone[3] = {proto_rng.uniform(0.0, 0.3), proto_rng.uniform(0.0, 0.3),
                      proto_rng.uniform(0.0, 0.3)};
    auto blob = [&](Tensor& img, long cy, long cx, long r) {
      for (long y = cy - r; y <= cy + r; ++y)
        for (long x = cx - r; x <= cx + r; ++x)
          if (y >= 0 && y < size && x >= 0 && x < size &&
              (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
            for (long c = 0; c < 3; ++c) img.at(c, y, x) = tone[c];
    };
    blob(proto, eye_y, size / 2 - eye_dx, 3);
    blob(proto, eye_y, size / 2 + eye_dx, 3);
    for (long x = size / 2 - eye_dx; x <= size / 2 + eye_dx; ++x)
      for (long y = mouth_y - 1; y <= mouth_y + 1; ++y)
        if (y >= 0 && y < size && x >= 0 && x < size)
          for (long c = 0; c < 3; ++c) proto.at(c, y, x) = tone[c];

    for (long k = 0; k < per_id; ++k) {
      Rng jit = root.fork((uint64_t)(1000 + id * 131 + k));
      FaceSample fs;
      fs.identity = id;
      fs.image = Tensor({3, size, size});
      const long dy = jit.index(5) - 2, dx = jit.index(5) - 2;
      const double gain = 1.0 + 0.1 * jit.uniform(-1.0, 1.0);
      for (long c = 0; c < 3; ++c)
        for (long y = 0; y < size; ++y)
          for (long x = 0; x < size; ++x) {
            const long sy = std::min(size - 1, std::max<long>(0, y + dy));
            const long sx = std::min(size - 1, std::max<long>(0, x + dx));
            fs.image.at(c, y, x) = gain * proto.at(c, sy, sx) + 0.02 * jit.uniform(-1.0, 1.0);
          }
      clamp01_inplace(fs.image);
      out.push_back(std::move(fs));
    }
  }
  return out;
}

EmbedTrainResult train_embedder(const std::vector<FaceSample>& corpus, long n_ids, long steps,
                                uint64_t seed) {
  Rng rng(seed);
  EmbedTrainResult res{ToyEmbedder::create(rng.fork(1).next_u64()), 0.0, 0.0};
  // cosine-margin classification head over identities
  Tensor w0({64, n_ids});
  Rng wr = rng.fork(2);
  for (long i = 0; i < w0.numel(); ++i) w0[i] = 0.1 * wr.normal();
  Var wcls = parameter(std::move(w0));
  auto params = res.model.params().vars();
  params.push_back(wcls);
  nn::Adam opt(params, 1e-3);

  Rng batch_rng = rng.fork(3);
  const long bsz = 16;
  const double margin = 2.0, scale_s = 10.0;
  for (long step = 0; step < steps; ++step) {
    std::vector<Tensor> imgs;
    std::vector<long> ids;
    for (long b = 0; b < bsz; ++b) {
      const auto& s = corpus[(size_t)batch_rng.index((long)corpus.size())];
      imgs.push_back(s.image);
      ids.push_back(s.identity);
    }
    Var emb = res.model.embed(constant(stack_images(imgs)));
    Var logits = scale(matmul(emb, wcls), scale_s);
    Tensor margin_mask({bsz, n_ids});
    for (long b = 0; b < bsz; ++b) margin_mask.at(b, ids[(size_t)b]) = margin;
    Var adj = sub(logits, constant(std::move(margin_mask)));
    Var loss = nn::ce_map(reshape(adj, {bsz, n_ids, 1, 1}), ids);
    opt.zero_grad();
    backward(loss);
    opt.step();
  }

  // held-out style separation statistics on the training identities
  double same = 0.0, diff = 0.0;
  long ns = 0, nd = 0;
  std::vector<Tensor> embs;
  std::vector<long> ids;
  for (size_t i = 0; i < corpus.size(); i += 2) {
    embs.push_back(res.model.embed_eval(corpus[i].image));
    ids.push_back(corpus[i].identity);
  }
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      double dotv = 0.0;
      for (long k = 0; k < 64; ++k) dotv += embs[i][k] * embs[j][k];
      if (ids[i] == ids[j]) {
        same += dotv;
        ++ns;
      } else {
        diff += dotv;
        ++nd;
      }
    }
  res.holdout_same_cos = ns ? same / (double)ns : 0.0;
  res.holdout_diff_cos = nd ? diff / (double)nd : 0.0;
  return res;
}

}  // namespace lict::ds
