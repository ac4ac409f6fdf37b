#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "specae/errors.hpp"
#include "specae/layers.hpp"
#include "specae/tensor.hpp"

namespace specae {

inline constexpr double kCovRidge = 1e-6;

/// Soft membership network: Z -> tanh hidden -> dropout -> K logits -> softmax.
struct EstimationNetwork {
  DenseLayer hidden;
  DenseLayer logits;
  double dropout = 0.5;

  static EstimationNetwork init(std::size_t in, std::size_t hidden_width, std::size_t k, double dropout, Rng& rng) {
    if (k == 0) throw ContractError("EstimationNetwork: need at least one component");
    return {DenseLayer::init(in, hidden_width, Activation::Tanh, rng),
            DenseLayer::init(hidden_width, k, Activation::Identity, rng), dropout};
  }

  std::size_t components() const { return logits.out(); }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    hidden.collect(prefix + ".hidden", out);
    logits.collect(prefix + ".logits", out);
  }
};

/// Responsibilities, n x K. Dropout is applied only when rng is given.
inline Tensor membership(const EstimationNetwork& net, const Tensor& z, Rng* rng = nullptr) {
  Tensor h = net.hidden.forward(z);
  if (rng != nullptr) h = dropout(h, net.dropout, *rng);
  return softmax_rows(net.logits.forward(h));
}

/// Frozen mixture parameters used for scoring and checkpoints.
struct GmmParams {
  std::vector<double> weights;       // phi_k
  Matrix means;                      // K x d
  std::vector<Matrix> covariances;   // K of d x d

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.cols; }
};

/// Mixture parameters kept on the tape so the energy term can be differentiated.
struct GmmTensors {
  Tensor weights;                   // 1 x K
  std::vector<Tensor> means;        // 1 x d each
  std::vector<Tensor> covariances;  // d x d each
  std::vector<bool> inert;          // zero total responsibility

  GmmParams freeze() const {
    GmmParams p;
    p.weights = weights.value().data;
    const std::size_t d = means.empty() ? 0 : means.front().cols();
    p.means = Matrix(means.size(), d);
    for (std::size_t k = 0; k < means.size(); ++k)
      for (std::size_t j = 0; j < d; ++j) p.means(k, j) = means[k](0, j);
    for (const auto& c : covariances) p.covariances.push_back(c.value());
    return p;
  }
};

/// Weighted mixture statistics from responsibilities:
///   phi_k = mean_i gamma_ik,  mu_k = sum_i gamma_ik z_i / sum_i gamma_ik,
///   Sigma_k = sum_i gamma_ik (z_i - mu_k)(z_i - mu_k)^T / sum_i gamma_ik + ridge I.
/// A component with zero total responsibility gets phi = 0, mu = 0, Sigma = I.
inline GmmTensors estimate_params(const Tensor& z, const Tensor& gamma) {
  if (z.rows() != gamma.rows()) throw DimensionError("estimate_params: Z and gamma disagree on row count");
  if (z.rows() == 0) throw ContractError("estimate_params: no samples");
  const std::size_t n = z.rows(), d = z.cols(), K = gamma.cols();
  GmmTensors out;
  Tensor mass = col_sum(gamma);
  out.weights = scale(mass, 1.0 / static_cast<double>(n));
  Tensor ridge = Tensor::constant([&] {
    Matrix r = Matrix::identity(d);
    for (double& v : r.data) v *= kCovRidge;
    return r;
  }());
  for (std::size_t k = 0; k < K; ++k) {
    if (!(mass(0, k) > 0.0)) {
      out.inert.push_back(true);
      out.means.push_back(Tensor::constant(Matrix(1, d)));
      out.covariances.push_back(Tensor::constant(Matrix::identity(d)));
      continue;
    }
    out.inert.push_back(false);
    Tensor g_k = slice_cols(gamma, k, k + 1);
    Tensor m_k = slice_cols(mass, k, k + 1);
    Tensor mu = div(matmul(transpose(g_k), z), m_k);
    Tensor centered = sub(z, mu);
    Tensor cov = add(div(matmul(transpose(mul(centered, g_k)), centered), m_k), ridge);
    out.means.push_back(mu);
    out.covariances.push_back(cov);
  }
  return out;
}

inline GmmParams estimate_params(const Matrix& z, const Matrix& gamma) {
  return estimate_params(Tensor::constant(z), Tensor::constant(gamma)).freeze();
}

/// Per-row energy -log sum_k phi_k N(z | mu_k, Sigma_k), n x 1, via log-sum-exp.
inline Tensor sample_energies(const Tensor& z, const GmmTensors& params) {
  const std::size_t d = z.cols();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  std::vector<Tensor> terms;
  for (std::size_t k = 0; k < params.means.size(); ++k) {
    if (params.inert[k]) continue;
    if (params.means[k].cols() != d) throw DimensionError("sample_energies: embedding width differs from mixture");
    Tensor inv, logdet;
    try {
      inv = inverse_spd(params.covariances[k]);
      logdet = logdet_spd(params.covariances[k]);
    } catch (const NumericalError&) {
      throw NumericalError("sample_energy: Cholesky failed for component " + std::to_string(k));
    }
    Tensor centered = sub(z, params.means[k]);
    Tensor quad = row_sum(mul(matmul(centered, inv), centered));
    Tensor log_phi = log(slice_cols(params.weights, k, k + 1));
    Tensor log_norm = scale(add_scalar(logdet, static_cast<double>(d) * log_2pi), -0.5);
    terms.push_back(add(add(scale(quad, -0.5), log_phi), log_norm));
  }
  if (terms.empty()) throw NumericalError("sample_energy: every mixture component is inert");
  return neg(logsumexp_rows(concat_cols(std::span<const Tensor>(terms))));
}

/// Energy of one embedding row under frozen parameters.
inline double sample_energy(std::span<const double> z, const GmmParams& params) {
  const std::size_t d = params.dim();
  if (z.size() != d) throw DimensionError("sample_energy: row width differs from mixture");
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> logs;
  std::vector<double> diff(d), y(d);
  Matrix l;
  for (std::size_t k = 0; k < params.components(); ++k) {
    if (!(params.weights[k] > 0.0)) continue;
    if (!kernel::cholesky(params.covariances[k], l)) {
      throw NumericalError("sample_energy: Cholesky failed for component " + std::to_string(k));
    }
    for (std::size_t j = 0; j < d; ++j) diff[j] = z[j] - params.means(k, j);
    // Forward-substitute L y = diff; the quadratic form is |y|^2.
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = diff[i];
      for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * y[p];
      y[i] = s / l(i, i);
      quad += y[i] * y[i];
    }
    const double logdet = kernel::cholesky_logdet(l);
    logs.push_back(std::log(params.weights[k]) - 0.5 * quad - 0.5 * (static_cast<double>(d) * log_2pi + logdet));
  }
  if (logs.empty()) throw NumericalError("sample_energy: every mixture component is inert");
  double mx = logs.front();
  for (double v : logs) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - mx);
  return -(mx + std::log(acc));
}

inline std::vector<double> sample_energies(const Matrix& z, const GmmParams& params) {
  std::vector<double> out(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) out[i] = sample_energy(z.row(i), params);
  return out;
}

/// sum_k sum_j 1 / Sigma_k[j][j]
inline Tensor covariance_penalty(const GmmTensors& params) {
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t k = 0; k < params.covariances.size(); ++k) {
    const Tensor& c = params.covariances[k];
    Matrix diag_mask(c.rows(), c.cols());
    for (std::size_t j = 0; j < c.rows(); ++j) diag_mask(j, j) = 1.0;
    // Off-diagonal entries become 1 so their reciprocals can be masked out without dividing by zero.
    Matrix off_fill(c.rows(), c.cols(), 1.0);
    for (std::size_t j = 0; j < c.rows(); ++j) off_fill(j, j) = 0.0;
    Tensor diag_only = add(mul(c, Tensor::constant(diag_mask)), Tensor::constant(std::move(off_fill)));
    Tensor recip = div(Tensor::constant(diag_mask), diag_only);
    total = add(total, sum(recip));
  }
  return total;
}

inline double covariance_penalty(const GmmParams& params) {
  double total = 0.0;
  for (const auto& c : params.covariances)
    for (std::size_t j = 0; j < c.rows; ++j) {
      if (!(c(j, j) > 0.0)) throw DomainError("covariance_penalty: non-positive diagonal");
      total += 1.0 / c(j, j);
    }
  return total;
}

}  // namespace specae
