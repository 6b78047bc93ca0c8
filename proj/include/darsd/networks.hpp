#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "darsd/ops.hpp"
#include "darsd/rng.hpp"
#include "darsd/tensor.hpp"

namespace darsd {

struct NamedParam {
  std::string name;
  Tensor value;
};
using ParamList = std::vector<NamedParam>;

// Identity on the forward pass; scales the incoming gradient by -strength.
inline Tensor grad_reverse(const Tensor& f, double strength) {
  if (strength < 0.0) throw ContractError("grad_reverse: strength must be >= 0");
  auto fi = f.impl();
  return detail::make_result(
      "grad_reverse", f.shape(), f.values(), {f},
      [fi, strength](detail::TensorImpl& o) {
        auto g = fi->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= strength * o.grad[i];
      });
}

// Inverted dropout expressed as a product with a constant mask.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  std::vector<double> mask(x.size());
  const double keep = 1.0 - rate;
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

inline Tensor leaky_relu(const Tensor& x, double slope = 0.01) {
  return sub(relu(x), mul(relu(mul(x, -1.0)), slope));
}

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {rng.uniform_tensor({in, out}, -bound, bound, true),
            Tensor::zeros({out}, true)};
  }

  Tensor operator()(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != weight.dim(0)) {
      throw ShapeError("linear: expected [batch x " + std::to_string(weight.dim(0)) +
                       "], got " + shape_str(x.shape()));
    }
    return add(matmul(x, weight), bias);
  }
};

struct ConvSpec {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel_size;
  std::size_t dilation;
};

struct ConvLayer {
  ConvSpec spec;
  Tensor weight;  // [out x kernel x in]
  Tensor bias;    // [out]
};

struct EncoderConfig {
  std::size_t channels = 3;
  std::size_t hidden = 32;
  std::size_t out_dim = 32;
  std::size_t kernel_size = 5;
  std::vector<std::size_t> dilations{1, 2};
  double dropout = 0.0;
};

// Causal dilated conv stack followed by global average pooling over time.
// Hidden layers use ReLU; the last conv is linear so features are signed.
struct Encoder {
  EncoderConfig config;
  std::vector<ConvLayer> layers;

  static Encoder init(const EncoderConfig& cfg, Rng& rng) {
    if (cfg.dilations.empty()) throw ContractError("encoder needs at least one layer");
    Encoder e{cfg, {}};
    std::size_t in = cfg.channels;
    for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
      const std::size_t out = i + 1 == cfg.dilations.size() ? cfg.out_dim : cfg.hidden;
      const ConvSpec spec{in, out, cfg.kernel_size, cfg.dilations[i]};
      const double bound = 1.0 / std::sqrt(static_cast<double>(in * cfg.kernel_size));
      e.layers.push_back(
          {spec, rng.uniform_tensor({out, cfg.kernel_size, in}, -bound, bound, true),
           Tensor::zeros({out}, true)});
      in = out;
    }
    return e;
  }

  std::size_t receptive_field() const {
    std::size_t r = 1;
    for (const auto& l : layers) r += (l.spec.kernel_size - 1) * l.spec.dilation;
    return r;
  }

  ParamList params() const {
    ParamList out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.push_back({"encoder.conv" + std::to_string(i) + ".weight", layers[i].weight});
      out.push_back({"encoder.conv" + std::to_string(i) + ".bias", layers[i].bias});
    }
    return out;
  }
};

// x: [batch x T x D] -> features [batch x d]. Dropout only when rng is given.
inline Tensor encode(const Encoder& enc, const Tensor& x, Rng* dropout_rng = nullptr) {
  if (x.rank() != 3 || x.dim(2) != enc.config.channels) {
    throw ShapeError("encode: expected [batch x T x " +
                     std::to_string(enc.config.channels) + "], got " +
                     shape_str(x.shape()));
  }
  if (x.dim(1) < enc.receptive_field()) {
    throw ShapeError("encode: sequence length " + std::to_string(x.dim(1)) +
                     " shorter than receptive field " +
                     std::to_string(enc.receptive_field()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < enc.layers.size(); ++i) {
    const auto& l = enc.layers[i];
    h = conv1d(h, l.weight, l.bias, l.spec.dilation);
    if (i + 1 < enc.layers.size()) {
      h = relu(h);
      if (dropout_rng != nullptr) h = dropout(h, enc.config.dropout, *dropout_rng);
    }
  }
  return mean(h, 1);
}

struct Discriminator {
  Linear hidden;
  Linear out;  // single logit

  static Discriminator init(std::size_t in_dim, std::size_t hidden_dim, Rng& rng) {
    return {Linear::init(in_dim, hidden_dim, rng), Linear::init(hidden_dim, 1, rng)};
  }

  ParamList params() const {
    return {{"disc.fc0.weight", hidden.weight}, {"disc.fc0.bias", hidden.bias},
            {"disc.fc1.weight", out.weight},    {"disc.fc1.bias", out.bias}};
  }
};

// Two-column probabilities [1 - D(f), D(f)] via a softmax over [0, logit],
// i.e. a sigmoid that never rounds through a subtraction.
inline Tensor discriminate_both(const Discriminator& disc, const Tensor& f) {
  if (f.rank() != 2 || f.dim(1) != disc.hidden.weight.dim(0)) {
    throw ShapeError("discriminate: expected [batch x " +
                     std::to_string(disc.hidden.weight.dim(0)) + "], got " +
                     shape_str(f.shape()));
  }
  Tensor logit = disc.out(leaky_relu(disc.hidden(f)));
  return softmax(concat({Tensor::zeros(logit.shape()), logit}, 1));
}

// D(f) in (0, 1), one per row.
inline Tensor discriminate(const Discriminator& disc, const Tensor& f) {
  Tensor both = discriminate_both(disc, f);
  return pick(both, std::vector<std::size_t>(f.dim(0), 1));
}

struct Classifier {
  Linear hidden;
  Linear out;
  double dropout = 0.1;

  static Classifier init(std::size_t in_dim, std::size_t hidden_dim,
                         std::size_t classes, double dropout, Rng& rng) {
    return {Linear::init(in_dim, hidden_dim, rng), Linear::init(hidden_dim, classes, rng),
            dropout};
  }

  std::size_t classes() const { return out.weight.dim(1); }

  ParamList params() const {
    return {{"clf.fc0.weight", hidden.weight}, {"clf.fc0.bias", hidden.bias},
            {"clf.fc1.weight", out.weight},    {"clf.fc1.bias", out.bias}};
  }
};

inline Tensor classify(const Classifier& clf, const Tensor& f, Rng* dropout_rng = nullptr) {
  Tensor h = relu(clf.hidden(f));
  if (dropout_rng != nullptr) h = dropout(h, clf.dropout, *dropout_rng);
  return clf.out(h);
}

// Row-wise argmax; ties go to the lowest index.
inline std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, out[i])) out[i] = j;
  return out;
}

// Mean softmax cross-entropy over rows.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  return mul(mean(log(pick(softmax(logits), labels), 1e-300)), -1.0);
}

}  // namespace darsd
