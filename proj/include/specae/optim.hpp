#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "specae/errors.hpp"
#include "specae/tensor.hpp"

namespace specae {

/// Glorot/Xavier uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (double& v : w.data) v = u(rng);
  return w;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// One bias-corrected Adam update applied in place. Moments are zero-initialized on first use.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows, p->cols);
      state.v.emplace_back(p->rows, p->cols);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: state belongs to a different parameter set");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = grads[k];
    if (!p.same_shape(g)) throw DimensionError("adam_step: gradient shape " + shape_str(g) + " vs " + shape_str(p));
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

/// Adam over a fixed list of parameter tensors, reading their accumulated gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {}

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    std::vector<Matrix*> values;
    std::vector<Matrix> grads;
    values.reserve(params_.size());
    grads.reserve(params_.size());
    for (auto& p : params_) {
      values.push_back(&p.mutable_value());
      grads.push_back(p.grad());
    }
    adam_step(values, grads, state_, cfg_);
  }

  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  AdamState state_;
};

}  // namespace specae
