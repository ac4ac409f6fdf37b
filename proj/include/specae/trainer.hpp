#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "specae/config.hpp"
#include "specae/errors.hpp"
#include "specae/gmm.hpp"
#include "specae/graph.hpp"
#include "specae/model.hpp"
#include "specae/optim.hpp"

namespace specae {

/// Independent generator for one purpose (init, split, training noise, injection) of a run.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

enum RngStream : std::uint64_t { kInitStream = 1, kSplitStream = 2, kNoiseStream = 3, kInjectStream = 4 };

struct LossTerms {
  double total = 0;
  double recon_attr = 0;
  double recon_graph = 0;
  double energy = 0;
  double cov_penalty = 0;
  double kl = 0;

  std::string describe() const {
    std::ostringstream os;
    os << "total=" << total << " recon_attr=" << recon_attr << " recon_graph=" << recon_graph << " energy=" << energy
       << " cov_penalty=" << cov_penalty << " kl=" << kl;
    return os.str();
  }
};

struct LossResult {
  Tensor total;
  LossTerms terms;
  GmmTensors gmm;
};

namespace detail {

inline Tensor masked_mse(const Tensor& x, const Tensor& recon, std::span<const std::size_t> rows) {
  return mean(square(sub(gather_rows(recon, rows), gather_rows(x, rows))));
}

}  // namespace detail

/// recon_attr + recon_graph + lambda1 * mean energy + lambda2 * covariance penalty + lambda_kl * KL,
/// every mean taken over the rows in `mask`. Terms with a zero weight are reported but not added.
inline LossResult loss(const SpecAEModel& model, const Tensor& x, const PropagationMatrix& s,
                       std::span<const std::size_t> mask, const TrainConfig& cfg, Rng* rng) {
  if (mask.empty()) throw ContractError("loss: empty training mask");
  ForwardPass f = forward(model, x, s, rng);
  LossResult r;
  std::vector<Tensor> parts;
  if (f.x_hat.defined()) {
    Tensor t = detail::masked_mse(x, f.x_hat, mask);
    r.terms.recon_attr = t.item();
    parts.push_back(t);
  }
  if (f.x_tilde.defined()) {
    Tensor t = detail::masked_mse(x, f.x_tilde, mask);
    r.terms.recon_graph = t.item();
    parts.push_back(t);
  }
  Tensor z_train = gather_rows(f.embedding.z, mask);
  Tensor gamma_train = gather_rows(f.gamma, mask);
  r.gmm = estimate_params(z_train, gamma_train);
  Tensor energy = mean(sample_energies(z_train, r.gmm));
  r.terms.energy = energy.item();
  if (cfg.lambda1 > 0) parts.push_back(scale(energy, cfg.lambda1));
  Tensor penalty = covariance_penalty(r.gmm);
  r.terms.cov_penalty = penalty.item();
  if (cfg.lambda2 > 0) parts.push_back(scale(penalty, cfg.lambda2));
  if (f.mu.defined()) {
    Tensor kl = kl_to_standard_normal(gather_rows(f.mu, mask), gather_rows(f.logsigma, mask));
    r.terms.kl = kl.item();
    if (cfg.lambda_kl > 0) parts.push_back(scale(kl, cfg.lambda_kl));
  }
  r.total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) r.total = add(r.total, parts[i]);
  r.terms.total = r.total.item();
  if (!std::isfinite(r.terms.total)) throw DivergenceError("non-finite loss: " + r.terms.describe());
  return r;
}

/// Per-node anomaly scores plus the ranking over evaluation nodes.
struct ScoredNodes {
  std::vector<double> energy;        // every node
  std::vector<std::size_t> ranking;  // eval nodes, highest energy first
  std::vector<bool> train_mask;
  std::vector<std::size_t> eval_nodes;
};

/// Eval nodes ordered by descending energy; equal energies keep ascending node index.
inline std::vector<std::size_t> rank_descending(std::span<const double> energy, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> order(nodes.begin(), nodes.end());
  std::sort(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });
  return order;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Semi-supervised: training nodes come from nodes not flagged in `known_anomalies`
/// and evaluation covers the rest. Unsupervised: training nodes are drawn from all
/// nodes and evaluation covers every node.
inline Split draw_split(std::size_t n, const TrainConfig& cfg, std::span<const bool> known_anomalies, Rng& rng) {
  if (!known_anomalies.empty() && known_anomalies.size() != n) throw DimensionError("draw_split: truth size");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const bool flagged = !known_anomalies.empty() && known_anomalies[i];
    if (cfg.mode == TrainMode::Unsupervised || !flagged) candidates.push_back(i);
  }
  if (candidates.empty()) throw ContractError("draw_split: no candidate training nodes");
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(candidates.size()))));
  Split split;
  split.train.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(split.train.begin(), split.train.end());
  if (cfg.mode == TrainMode::Unsupervised) {
    split.eval.resize(n);
    std::iota(split.eval.begin(), split.eval.end(), std::size_t{0});
  } else {
    std::vector<bool> in_train(n, false);
    for (std::size_t i : split.train) in_train[i] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_train[i]) split.eval.push_back(i);
  }
  return split;
}

/// Mixture parameters from a deterministic pass over the training rows.
inline GmmParams fit_mixture(const SpecAEModel& model, const Tensor& x, const PropagationMatrix& s,
                             std::span<const std::size_t> train_nodes) {
  ForwardPass f = forward(model, x, s, nullptr);
  return estimate_params(gather_rows(f.embedding.z, train_nodes), gather_rows(f.gamma, train_nodes)).freeze();
}

/// Deterministic pass; energy of every node under frozen mixture parameters.
inline ScoredNodes score(const SpecAEModel& model, const GmmParams& params, const AttributedGraph& g,
                         const PropagationMatrix& s, std::span<const std::size_t> eval_nodes,
                         std::span<const std::size_t> train_nodes = {}) {
  ForwardPass f = forward(model, Tensor::constant(g.attributes), s, nullptr);
  ScoredNodes out;
  out.energy = sample_energies(f.embedding.z.value(), params);
  for (double e : out.energy)
    if (!std::isfinite(e)) throw NumericalError("score: non-finite energy");
  out.eval_nodes.assign(eval_nodes.begin(), eval_nodes.end());
  out.ranking = rank_descending(out.energy, eval_nodes);
  out.train_mask.assign(g.n, false);
  for (std::size_t i : train_nodes) out.train_mask[i] = true;
  return out;
}

struct TrainResult {
  SpecAEModel model;
  GmmParams gmm;
  ScoredNodes scored;
  std::vector<LossTerms> trace;  // one entry per epoch, measured before that epoch's update
  Split split;
};

/// Epoch loop: stochastic full-graph pass, masked loss, Adam step, mixture refresh.
inline TrainResult train(const AttributedGraph& g, const TrainConfig& cfg, const Split& split) {
  cfg.validate();
  if (split.train.empty()) throw ContractError("train: empty training split");
  const PropagationMatrix s = normalize_propagation(g);
  const Tensor x = Tensor::constant(g.attributes);
  Rng init_rng = stream_rng(cfg.seed, kInitStream);
  Rng noise_rng = stream_rng(cfg.seed, kNoiseStream);

  TrainResult r;
  r.split = split;
  r.model = SpecAEModel::init(cfg, g.m, init_rng);
  Adam opt(r.model.parameter_tensors(), AdamConfig{cfg.lr});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossResult l;
    try {
      l = loss(r.model, x, s, split.train, cfg, &noise_rng);
    } catch (const DivergenceError& e) {
      throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    opt.zero_grad();
    backward(l.total);
    opt.step();
    r.gmm = l.gmm.freeze();
    r.trace.push_back(l.terms);
  }
  r.gmm = fit_mixture(r.model, x, s, split.train);
  r.scored = score(r.model, r.gmm, g, s, split.eval, split.train);
  return r;
}

/// Draws the split from the seed; `known_anomalies` (may be empty) keeps flagged nodes out of training.
inline TrainResult train(const AttributedGraph& g, const TrainConfig& cfg, std::span<const bool> known_anomalies = {}) {
  Rng split_rng = stream_rng(cfg.seed, kSplitStream);
  return train(g, cfg, draw_split(g.n, cfg, known_anomalies, split_rng));
}

}  // namespace specae
