#pragma once

#include <string>
#include <vector>

#include "specae/errors.hpp"
#include "specae/graph.hpp"
#include "specae/optim.hpp"
#include "specae/tensor.hpp"

namespace specae {

enum class Activation { Identity, Relu, Tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ParseError("unknown activation '" + s + "'");
}

inline Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return relu(x);
    case Activation::Tanh: return tanh(x);
  }
  return x;
}

/// A trainable matrix with a stable checkpoint name.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

inline void check_width(const Tensor& x, std::size_t expected, const char* who) {
  if (x.cols() != expected) {
    throw DimensionError(std::string(who) + ": input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(expected));
  }
}

// ---------------------------------------------------------------------------
// Attribute autoencoder.

/// act(b + x W)
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation act = Activation::Identity;

  static DenseLayer init(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    return {Tensor::parameter(glorot_uniform(in, out, rng)), Tensor::parameter(Matrix(1, out)), act};
  }

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }

  Tensor forward(const Tensor& x) const {
    check_width(x, in(), "DenseLayer");
    return activate(add(matmul(x, weight), bias), act);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

struct DenseAutoencoder {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  /// in -> hidden (relu) -> code (identity) -> hidden (relu) -> in (identity)
  static DenseAutoencoder init(std::size_t in, std::size_t hidden, std::size_t code, Rng& rng) {
    DenseAutoencoder ae;
    ae.encoder.push_back(DenseLayer::init(in, hidden, Activation::Relu, rng));
    ae.encoder.push_back(DenseLayer::init(hidden, code, Activation::Identity, rng));
    ae.decoder.push_back(DenseLayer::init(code, hidden, Activation::Relu, rng));
    ae.decoder.push_back(DenseLayer::init(hidden, in, Activation::Identity, rng));
    return ae;
  }

  std::size_t code_width() const { return encoder.back().out(); }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect(prefix + ".enc" + std::to_string(i), out);
    for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect(prefix + ".dec" + std::to_string(i), out);
  }
};

inline Tensor ae_encode(const DenseAutoencoder& ae, const Tensor& x) {
  Tensor h = x;
  for (const auto& layer : ae.encoder) h = layer.forward(h);
  return h;
}

inline Tensor ae_decode(const DenseAutoencoder& ae, const Tensor& z) {
  Tensor h = z;
  for (const auto& layer : ae.decoder) h = layer.forward(h);
  return h;
}

// ---------------------------------------------------------------------------
// Spectral layers.
//
// Both layers mix a node's own features with its normalized neighborhood
// average. Smoothing pulls toward the neighborhood, sharpening pushes away:
//
//   Conv(H)   = act((1 - alpha) H + alpha S H) W
//   Deconv(Z) = act((1 + alpha) Z - alpha S Z) W
//
// With weights_inside_activation the weight moves inside: act(mix(H) W).

struct ConvLayer {
  Tensor weight;
  double alpha = 0.7;
  Activation act = Activation::Identity;
  bool weights_inside_activation = false;

  static ConvLayer init(std::size_t in, std::size_t out, double alpha, Activation act, Rng& rng) {
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("ConvLayer: alpha must lie in [0, 1]");
    return {Tensor::parameter(glorot_uniform(in, out, rng)), alpha, act, false};
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
  }
};

struct DeconvLayer {
  Tensor weight;
  double alpha = 0.7;
  Activation act = Activation::Identity;
  bool weights_inside_activation = false;

  static DeconvLayer init(std::size_t in, std::size_t out, double alpha, Activation act, Rng& rng) {
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("DeconvLayer: alpha must lie in [0, 1]");
    return {Tensor::parameter(glorot_uniform(in, out, rng)), alpha, act, false};
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
  }
};

/// (1 - alpha) H + alpha S H
inline Tensor laplacian_smooth(const PropagationMatrix& s, const Tensor& h, double alpha) {
  if (alpha == 0.0) return h;
  Tensor sh = propagate(s, h);
  if (alpha == 1.0) return sh;
  return add(scale(h, 1.0 - alpha), scale(sh, alpha));
}

/// (1 + alpha) Z - alpha S Z
inline Tensor laplacian_sharpen(const PropagationMatrix& s, const Tensor& z, double alpha) {
  if (alpha == 0.0) return z;
  return sub(scale(z, 1.0 + alpha), scale(propagate(s, z), alpha));
}

namespace detail {

inline Tensor weighted(const Tensor& mixed, const Tensor& weight, Activation act, bool inside) {
  if (inside) return activate(matmul(mixed, weight), act);
  return matmul(activate(mixed, act), weight);
}

}  // namespace detail

inline Tensor conv_forward(const ConvLayer& layer, const PropagationMatrix& s, const Tensor& h) {
  check_width(h, layer.weight.rows(), "conv_forward");
  return detail::weighted(laplacian_smooth(s, h, layer.alpha), layer.weight, layer.act,
                          layer.weights_inside_activation);
}

inline Tensor deconv_forward(const DeconvLayer& layer, const PropagationMatrix& s, const Tensor& z) {
  check_width(z, layer.weight.rows(), "deconv_forward");
  return detail::weighted(laplacian_sharpen(s, z, layer.alpha), layer.weight, layer.act,
                          layer.weights_inside_activation);
}

// ---------------------------------------------------------------------------
// Variational graph encoder and sharpening decoder.

inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 10.0;

struct VariationalGraphEncoder {
  std::vector<ConvLayer> shared;
  ConvLayer mu_head;
  ConvLayer logsigma_head;

  static VariationalGraphEncoder init(std::size_t in, std::size_t hidden, std::size_t latent, double alpha,
                                      Rng& rng) {
    VariationalGraphEncoder e;
    e.shared.push_back(ConvLayer::init(in, hidden, alpha, Activation::Relu, rng));
    e.mu_head = ConvLayer::init(hidden, latent, alpha, Activation::Identity, rng);
    e.logsigma_head = ConvLayer::init(hidden, latent, alpha, Activation::Identity, rng);
    return e;
  }

  std::size_t latent_width() const { return mu_head.weight.cols(); }

  template <class F>
  void for_each_layer(F&& f) {
    for (auto& l : shared) f(l);
    f(mu_head);
    f(logsigma_head);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (std::size_t i = 0; i < shared.size(); ++i) shared[i].collect(prefix + ".conv" + std::to_string(i), out);
    mu_head.collect(prefix + ".conv_mu", out);
    logsigma_head.collect(prefix + ".conv_sigma", out);
  }
};

struct VariationalOutput {
  Tensor z;
  Tensor mu;
  Tensor logsigma;  // clamped to [kLogSigmaMin, kLogSigmaMax]
};

/// mu + exp(logsigma) * eps
inline Tensor reparameterize(const Tensor& mu, const Tensor& logsigma, Matrix eps) {
  if (!eps.same_shape(mu.value())) throw DimensionError("reparameterize: noise shape mismatch");
  return add(mu, mul(exp(logsigma), Tensor::constant(std::move(eps))));
}

/// Encoder heads without sampling; logsigma already clamped.
inline VariationalOutput variational_heads(const VariationalGraphEncoder& enc, const PropagationMatrix& s,
                                           const Tensor& x) {
  Tensor h = x;
  for (const auto& layer : enc.shared) h = conv_forward(layer, s, h);
  Tensor mu = conv_forward(enc.mu_head, s, h);
  Tensor logsigma = clamp(conv_forward(enc.logsigma_head, s, h), kLogSigmaMin, kLogSigmaMax);
  return {mu, mu, logsigma};
}

/// Train mode draws one standard-normal sample per entry; eval mode returns z = mu.
inline VariationalOutput variational_encode(const VariationalGraphEncoder& enc, const PropagationMatrix& s,
                                            const Tensor& x, Rng& rng, bool train_mode) {
  VariationalOutput out = variational_heads(enc, s, x);
  if (train_mode) out.z = reparameterize(out.mu, out.logsigma, standard_normal(out.mu.rows(), out.mu.cols(), rng));
  return out;
}

/// Mean over nodes of KL(N(mu, diag sigma^2) || N(0, I)).
inline Tensor kl_to_standard_normal(const Tensor& mu, const Tensor& logsigma) {
  if (!mu.value().same_shape(logsigma.value())) throw DimensionError("kl_to_standard_normal: shape mismatch");
  Tensor two_logsigma = scale(logsigma, 2.0);
  Tensor terms = sub(add(square(mu), exp(two_logsigma)), add_scalar(two_logsigma, 1.0));
  return scale(sum(terms), 0.5 / static_cast<double>(mu.rows()));
}

struct GraphDecoder {
  std::vector<DeconvLayer> layers;

  /// latent -> hidden (relu) -> out (identity)
  static GraphDecoder init(std::size_t latent, std::size_t hidden, std::size_t out, double alpha, Rng& rng) {
    GraphDecoder d;
    d.layers.push_back(DeconvLayer::init(latent, hidden, alpha, Activation::Relu, rng));
    d.layers.push_back(DeconvLayer::init(hidden, out, alpha, Activation::Identity, rng));
    return d;
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".deconv" + std::to_string(i), out);
  }
};

inline Tensor graph_decode(const GraphDecoder& dec, const PropagationMatrix& s, const Tensor& z) {
  Tensor h = z;
  for (const auto& layer : dec.layers) h = deconv_forward(layer, s, h);
  return h;
}

}  // namespace specae
