#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specae/config.hpp"
#include "specae/embedding.hpp"
#include "specae/gmm.hpp"
#include "specae/graph.hpp"
#include "specae/layers.hpp"

namespace specae {

/// Every trainable part of the detector. Branches disabled by the ablation are absent.
struct SpecAEModel {
  Ablation ablation = Ablation::Full;
  std::optional<DenseAutoencoder> attribute_ae;     // absent for N
  std::optional<VariationalGraphEncoder> encoder;   // absent for S
  std::optional<GraphDecoder> decoder;              // absent for S
  EstimationNetwork estimator;

  bool uses_attribute_branch() const { return ablation != Ablation::N; }
  bool uses_graph_branch() const { return ablation != Ablation::S; }
  bool uses_error_features() const { return ablation != Ablation::NR; }

  static EmbeddingLayout layout_for(const TrainConfig& cfg) {
    EmbeddingLayout l;
    const bool attr = cfg.ablation != Ablation::N;
    const bool graph = cfg.ablation != Ablation::S;
    const bool err = cfg.ablation != Ablation::NR;
    l.widths = {attr ? cfg.d1 : 0, graph ? cfg.d2 : 0, attr && err ? 2u : 0u, graph && err ? 2u : 0u};
    return l;
  }

  static SpecAEModel init(const TrainConfig& cfg, std::size_t attr_dim, Rng& rng) {
    cfg.validate();
    SpecAEModel model;
    model.ablation = cfg.ablation;
    if (model.uses_attribute_branch()) model.attribute_ae = DenseAutoencoder::init(attr_dim, cfg.hidden, cfg.d1, rng);
    if (model.uses_graph_branch()) {
      model.encoder = VariationalGraphEncoder::init(attr_dim, cfg.hidden, cfg.d2, cfg.alpha, rng);
      model.decoder = GraphDecoder::init(cfg.d2, cfg.hidden, attr_dim, cfg.alpha, rng);
      model.encoder->for_each_layer([&](ConvLayer& l) { l.weights_inside_activation = cfg.weights_inside_activation; });
      for (auto& l : model.decoder->layers) l.weights_inside_activation = cfg.weights_inside_activation;
    }
    model.estimator = EstimationNetwork::init(layout_for(cfg).total(), cfg.estimation_hidden, cfg.k_components,
                                              cfg.estimation_dropout, rng);
    return model;
  }

  std::vector<NamedParam> parameters() const {
    std::vector<NamedParam> out;
    if (attribute_ae) attribute_ae->collect("attr_ae", out);
    if (encoder) encoder->collect("graph_enc", out);
    if (decoder) decoder->collect("graph_dec", out);
    estimator.collect("estimator", out);
    return out;
  }

  std::vector<Tensor> parameter_tensors() const {
    std::vector<Tensor> out;
    for (auto& p : parameters()) out.push_back(p.tensor);
    return out;
  }
};

struct ForwardPass {
  Tensor x_hat;     // attribute AE reconstruction
  Tensor x_tilde;   // Deconv reconstruction
  Tensor z_x;
  Tensor z_g;
  Tensor mu;
  Tensor logsigma;
  JointEmbedding embedding;
  Tensor gamma;     // responsibilities
};

/// Full-graph forward pass. With rng set, the graph code is sampled and
/// dropout is active; without it the pass is deterministic (z_g = mu).
inline ForwardPass forward(const SpecAEModel& model, const Tensor& x, const PropagationMatrix& s, Rng* rng) {
  ForwardPass f;
  Tensor err_x, err_g;
  if (model.attribute_ae) {
    f.z_x = ae_encode(*model.attribute_ae, x);
    f.x_hat = ae_decode(*model.attribute_ae, f.z_x);
    if (model.uses_error_features()) err_x = reconstruction_features(x, f.x_hat);
  }
  if (model.encoder) {
    VariationalOutput v = rng ? variational_encode(*model.encoder, s, x, *rng, true) : variational_heads(*model.encoder, s, x);
    f.z_g = v.z;
    f.mu = v.mu;
    f.logsigma = v.logsigma;
    f.x_tilde = graph_decode(*model.decoder, s, f.z_g);
    if (model.uses_error_features()) err_g = reconstruction_features(x, f.x_tilde);
  }
  f.embedding = assemble(f.z_x, f.z_g, err_x, err_g);
  f.gamma = membership(model.estimator, f.embedding.z, rng);
  return f;
}

}  // namespace specae
