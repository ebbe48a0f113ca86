#include "occlass/nnet.hpp"

#include <algorithm>
#include <cmath>

namespace occlass {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Gelu: return "gelu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "gelu") return Activation::Gelu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + name);
}

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::Baseline: return "baseline";
    case HeadKind::Simple: return "simple";
    case HeadKind::OvrBinary: return "ovr_binary";
    case HeadKind::SkillNet: return "skillnet";
  }
  return "baseline";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "baseline") return HeadKind::Baseline;
  if (name == "simple") return HeadKind::Simple;
  if (name == "ovr_binary") return HeadKind::OvrBinary;
  if (name == "skillnet") return HeadKind::SkillNet;
  throw std::invalid_argument("unknown head kind: " + name);
}

void HeadArchitecture::validate() const {
  require(!layers.empty(), "architecture needs at least one layer");
  require(num_classes >= 1, "architecture needs at least one class");
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    require(l.in_dim >= 1 && l.out_dim >= 1, "layer dimensions must be positive");
    require(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0, "dropout rate must be in [0,1)");
    if (i > 0) require(l.in_dim == layers[i - 1].out_dim, "layer dimensions must chain");
  }
  require(layers.back().out_dim == num_classes, "final layer width must equal num_classes");
  switch (kind) {
    case HeadKind::Baseline:
      require(layers.size() == 1, "baseline head is a single linear layer");
      require(layers[0].activation == Activation::Identity && !layers[0].layer_norm &&
                  layers[0].dropout_rate == 0.0,
              "baseline head is plain linear");
      break;
    case HeadKind::Simple:
      require(layers.back().activation == Activation::Identity,
              "softmax heads end in identity logits");
      break;
    case HeadKind::OvrBinary:
      require(layers.back().activation == Activation::Sigmoid,
              "one-vs-rest head ends in per-class sigmoids");
      break;
    case HeadKind::SkillNet: {
      require(layers.size() == 4, "skill head has hidden widths 512, 1024, 512");
      const size_t widths[3] = {512, 1024, 512};
      for (size_t i = 0; i < 3; ++i) {
        require(layers[i].out_dim == widths[i] && layers[i].activation == Activation::Gelu &&
                    layers[i].layer_norm,
                "skill head has hidden widths 512, 1024, 512 with gelu and layer norm");
      }
      require(layers.back().activation == Activation::Identity,
              "softmax heads end in identity logits");
      break;
    }
  }
}

HeadArchitecture baseline_arch(size_t in_dim, size_t num_classes) {
  HeadArchitecture a;
  a.kind = HeadKind::Baseline;
  a.num_classes = num_classes;
  a.layers = {{in_dim, num_classes, Activation::Identity, false, 0.0}};
  a.validate();
  return a;
}

HeadArchitecture simple_arch(size_t in_dim, size_t num_classes, size_t hidden, double dropout) {
  HeadArchitecture a;
  a.kind = HeadKind::Simple;
  a.num_classes = num_classes;
  a.layers = {{in_dim, hidden, Activation::Gelu, true, dropout},
              {hidden, num_classes, Activation::Identity, false, 0.0}};
  a.validate();
  return a;
}

HeadArchitecture skillnet_arch(size_t in_dim, size_t num_classes, double dropout) {
  HeadArchitecture a;
  a.kind = HeadKind::SkillNet;
  a.num_classes = num_classes;
  a.layers = {{in_dim, 512, Activation::Gelu, true, dropout},
              {512, 1024, Activation::Gelu, true, dropout},
              {1024, 512, Activation::Gelu, true, dropout},
              {512, num_classes, Activation::Identity, false, 0.0}};
  a.validate();
  return a;
}

HeadArchitecture ovr_arch(size_t in_dim, size_t num_classes) {
  HeadArchitecture a;
  a.kind = HeadKind::OvrBinary;
  a.num_classes = num_classes;
  a.layers = {{in_dim, num_classes, Activation::Sigmoid, false, 0.0}};
  a.validate();
  return a;
}

ModelParams ModelParams::layout(const HeadArchitecture& arch) {
  arch.validate();
  ModelParams p;
  size_t offset = 0;
  for (const LayerSpec& l : arch.layers) {
    Block b;
    b.in = l.in_dim;
    b.out = l.out_dim;
    b.ln = l.layer_norm;
    b.w = offset;
    offset += b.in * b.out;
    b.b = offset;
    offset += b.out;
    if (b.ln) {
      b.g = offset;
      offset += b.out;
      b.lb = offset;
      offset += b.out;
    }
    p.blocks_.push_back(b);
  }
  p.data_.assign(offset, 0.0);
  return p;
}

ModelParams ModelParams::zeros(const HeadArchitecture& arch) { return layout(arch); }

ModelParams ModelParams::zeros_like() const {
  ModelParams p;
  p.blocks_ = blocks_;
  p.data_.assign(data_.size(), 0.0);
  return p;
}

ModelParams ModelParams::init(const HeadArchitecture& arch, uint64_t seed) {
  ModelParams p = layout(arch);
  Rng rng(seed);
  for (size_t l = 0; l < p.blocks_.size(); ++l) {
    const Block& blk = p.blocks_[l];
    double bound = 1.0 / std::sqrt(static_cast<double>(blk.in));
    for (double& w : p.weight(l)) w = rng.uniform(-bound, bound);
    // biases start at zero; layer norm starts as the identity transform
    if (blk.ln) {
      for (double& g : p.gain(l)) g = 1.0;
    }
  }
  return p;
}

const ModelParams::Block& ModelParams::block(size_t layer) const {
  if (layer >= blocks_.size()) throw ShapeMismatch("layer index out of range");
  return blocks_[layer];
}

std::span<double> ModelParams::weight(size_t layer) {
  const Block& b = block(layer);
  return {data_.data() + b.w, b.in * b.out};
}
std::span<const double> ModelParams::weight(size_t layer) const {
  const Block& b = block(layer);
  return {data_.data() + b.w, b.in * b.out};
}
std::span<double> ModelParams::bias(size_t layer) {
  const Block& b = block(layer);
  return {data_.data() + b.b, b.out};
}
std::span<const double> ModelParams::bias(size_t layer) const {
  const Block& b = block(layer);
  return {data_.data() + b.b, b.out};
}
std::span<double> ModelParams::gain(size_t layer) {
  const Block& b = block(layer);
  return b.ln ? std::span<double>{data_.data() + b.g, b.out} : std::span<double>{};
}
std::span<const double> ModelParams::gain(size_t layer) const {
  const Block& b = block(layer);
  return b.ln ? std::span<const double>{data_.data() + b.g, b.out} : std::span<const double>{};
}
std::span<double> ModelParams::ln_bias(size_t layer) {
  const Block& b = block(layer);
  return b.ln ? std::span<double>{data_.data() + b.lb, b.out} : std::span<double>{};
}
std::span<const double> ModelParams::ln_bias(size_t layer) const {
  const Block& b = block(layer);
  return b.ln ? std::span<const double>{data_.data() + b.lb, b.out} : std::span<const double>{};
}

bool ModelParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / kSqrt2)); }

double gelu_grad(double x) {
  double cdf = 0.5 * (1.0 + std::erf(x / kSqrt2));
  double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> forward(const HeadArchitecture& arch, const ModelParams& params,
                            std::span<const double> x, Mode mode, Rng* rng,
                            ForwardCache* cache) {
  if (arch.layers.empty() || x.size() != arch.layers.front().in_dim) {
    throw ShapeMismatch("input dimension does not match the first layer");
  }
  if (params.layer_count() != arch.layers.size()) {
    throw ShapeMismatch("parameter layout does not match the architecture");
  }
  if (cache) {
    cache->layers.assign(arch.layers.size(), LayerCache{});
  }
  std::vector<double> cur(x.begin(), x.end());
  for (size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    auto W = params.weight(l);
    auto b = params.bias(l);

    std::vector<double> z(spec.out_dim);
    for (size_t o = 0; o < spec.out_dim; ++o) {
      double acc = b[o];
      const double* row = W.data() + o * spec.in_dim;
      for (size_t i = 0; i < spec.in_dim; ++i) acc += row[i] * cur[i];
      z[o] = acc;
    }

    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->input = std::move(cur);

    std::vector<double> normed;
    if (spec.layer_norm) {
      double mean = 0.0;
      for (double v : z) mean += v;
      mean /= static_cast<double>(z.size());
      double var = 0.0;
      for (double v : z) var += (v - mean) * (v - mean);
      var /= static_cast<double>(z.size());
      double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
      auto g = params.gain(l);
      auto lb = params.ln_bias(l);
      normed.resize(z.size());
      for (size_t i = 0; i < z.size(); ++i) {
        normed[i] = g[i] * (z[i] - mean) * inv_std + lb[i];
      }
      if (lc) {
        lc->mean = mean;
        lc->inv_std = inv_std;
      }
    } else {
      normed = z;
    }
    if (lc) lc->linear = std::move(z);

    std::vector<double> activated(normed.size());
    switch (spec.activation) {
      case Activation::Identity: activated = normed; break;
      case Activation::Gelu:
        for (size_t i = 0; i < normed.size(); ++i) activated[i] = gelu(normed[i]);
        break;
      case Activation::Sigmoid:
        for (size_t i = 0; i < normed.size(); ++i) activated[i] = sigmoid(normed[i]);
        break;
    }
    if (lc) lc->normed = std::move(normed);

    if (mode == Mode::Train && spec.dropout_rate > 0.0) {
      if (!rng) throw std::invalid_argument("train-mode dropout needs an rng");
      double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
      std::vector<double> mask(activated.size());
      for (size_t i = 0; i < activated.size(); ++i) {
        mask[i] = rng->next_double() < spec.dropout_rate ? 0.0 : keep_scale;
        activated[i] *= mask[i];
      }
      if (lc) lc->mask = std::move(mask);
      if (lc) lc->activated = activated;
      cur = std::move(activated);
    } else {
      if (lc) lc->activated = activated;
      cur = std::move(activated);
    }
  }
  return cur;
}

std::vector<double> backward_into(const HeadArchitecture& arch, const ModelParams& params,
                                  const ForwardCache& cache, std::span<const double> dout,
                                  ModelParams& grads) {
  if (cache.layers.size() != arch.layers.size()) {
    throw ShapeMismatch("cache does not match the architecture");
  }
  if (dout.size() != arch.layers.back().out_dim) {
    throw ShapeMismatch("output gradient dimension does not match the final layer");
  }
  if (grads.size() != params.size()) {
    throw ShapeMismatch("gradient buffer does not match the parameter layout");
  }
  std::vector<double> d(dout.begin(), dout.end());
  for (size_t l = arch.layers.size(); l-- > 0;) {
    const LayerSpec& spec = arch.layers[l];
    const LayerCache& lc = cache.layers[l];

    if (!lc.mask.empty()) {
      for (size_t i = 0; i < d.size(); ++i) d[i] *= lc.mask[i];
    }

    switch (spec.activation) {
      case Activation::Identity: break;
      case Activation::Gelu:
        for (size_t i = 0; i < d.size(); ++i) d[i] *= gelu_grad(lc.normed[i]);
        break;
      case Activation::Sigmoid:
        for (size_t i = 0; i < d.size(); ++i) {
          // post-dropout activations are unusable here; recompute from normed
          double s = sigmoid(lc.normed[i]);
          d[i] *= s * (1.0 - s);
        }
        break;
    }

    if (spec.layer_norm) {
      auto g = params.gain(l);
      auto dg = grads.gain(l);
      auto dlb = grads.ln_bias(l);
      size_t m = d.size();
      std::vector<double> xhat(m), dxhat(m);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (size_t i = 0; i < m; ++i) {
        xhat[i] = (lc.linear[i] - lc.mean) * lc.inv_std;
        dlb[i] += d[i];
        dg[i] += d[i] * xhat[i];
        dxhat[i] = d[i] * g[i];
        sum_dxhat += dxhat[i];
        sum_dxhat_xhat += dxhat[i] * xhat[i];
      }
      double inv_m = 1.0 / static_cast<double>(m);
      for (size_t i = 0; i < m; ++i) {
        d[i] = lc.inv_std * (dxhat[i] - inv_m * sum_dxhat - xhat[i] * inv_m * sum_dxhat_xhat);
      }
    }

    auto W = params.weight(l);
    auto dW = grads.weight(l);
    auto db = grads.bias(l);
    std::vector<double> dinput(spec.in_dim, 0.0);
    for (size_t o = 0; o < spec.out_dim; ++o) {
      db[o] += d[o];
      const double* wrow = W.data() + o * spec.in_dim;
      double* dwrow = dW.data() + o * spec.in_dim;
      for (size_t i = 0; i < spec.in_dim; ++i) {
        dwrow[i] += d[o] * lc.input[i];
        dinput[i] += wrow[i] * d[o];
      }
    }
    d = std::move(dinput);
  }
  return d;
}

ModelParams backward(const HeadArchitecture& arch, const ModelParams& params,
                     const ForwardCache& cache, std::span<const double> dout) {
  ModelParams grads = params.zeros_like();
  backward_into(arch, params, cache, dout, grads);
  return grads;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double cross_entropy(std::span<const double> probs, size_t target) {
  if (target >= probs.size()) throw ShapeMismatch("target class out of range");
  return -std::log(std::max(probs[target], kLogFloor));
}

std::vector<double> softmax_ce_grad(std::span<const double> probs, size_t target) {
  if (target >= probs.size()) throw ShapeMismatch("target class out of range");
  std::vector<double> g(probs.begin(), probs.end());
  g[target] -= 1.0;
  return g;
}

namespace {

std::vector<double> softened(std::span<const double> logits, double t) {
  std::vector<double> scaled(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / t;
  return softmax(scaled);
}

}  // namespace

double distill_loss(std::span<const double> teacher_logits,
                    std::span<const double> student_logits, double temperature) {
  if (teacher_logits.size() != student_logits.size()) {
    throw ShapeMismatch("teacher and student logit lengths differ");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  auto p = softened(teacher_logits, temperature);
  auto q = softened(student_logits, temperature);
  double loss = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    loss -= p[i] * std::log(std::max(q[i], kLogFloor));
  }
  return loss;
}

std::vector<double> distill_grad(std::span<const double> teacher_logits,
                                 std::span<const double> student_logits, double temperature) {
  if (teacher_logits.size() != student_logits.size()) {
    throw ShapeMismatch("teacher and student logit lengths differ");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  auto p = softened(teacher_logits, temperature);
  auto q = softened(student_logits, temperature);
  std::vector<double> g(p.size());
  for (size_t i = 0; i < p.size(); ++i) g[i] = (q[i] - p[i]) / temperature;
  return g;
}

double ovr_bce(std::span<const double> scores, std::span<const double> targets,
               std::vector<double>* grad_scores) {
  if (scores.size() != targets.size()) {
    throw ShapeMismatch("score and target lengths differ");
  }
  double loss = 0.0;
  double inv_c = 1.0 / static_cast<double>(scores.size());
  if (grad_scores) grad_scores->assign(scores.size(), 0.0);
  for (size_t i = 0; i < scores.size(); ++i) {
    double s = scores[i], y = targets[i];
    loss -= y * std::log(std::max(s, kLogFloor)) +
            (1.0 - y) * std::log(std::max(1.0 - s, kLogFloor));
    if (grad_scores) {
      (*grad_scores)[i] = inv_c * (s - y) / std::max(s * (1.0 - s), kLogFloor);
    }
  }
  return loss * inv_c;
}

}  // namespace occlass
