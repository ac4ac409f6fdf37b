#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "specae/tensor.hpp"

namespace specae::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares the analytic gradient of `f` at `param` with central differences.
/// `f` rebuilds the whole computation from the parameter tensors each call.
/// Relative error is |a - n| / max(1, |a|, |n|), computed per entry.
inline GradCheck check_gradient(const std::function<Tensor()>& f, Tensor param, double step = 1e-5,
                                std::vector<std::size_t> entries = {}) {
  param.zero_grad();
  backward(f());
  const Matrix analytic = param.grad();
  if (entries.empty()) {
    entries.resize(param.value().size());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
  }
  GradCheck out;
  for (std::size_t idx : entries) {
    double& v = param.mutable_value().data[idx];
    const double saved = v;
    v = saved + step;
    const double up = f().item();
    v = saved - step;
    const double down = f().item();
    v = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.data[idx];
    const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
    ++out.checked;
  }
  return out;
}

/// Dense A + I based normalization computed directly from an edge list.
inline Matrix dense_normalized_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Matrix a = Matrix::identity(n);
  for (auto [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
  return s;
}

inline Matrix dense_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace specae::testing
