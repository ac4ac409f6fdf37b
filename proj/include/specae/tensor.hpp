#pragma once

// Dense float64 matrices with a dynamic reverse-mode tape.
//
// Every op allocates a fresh node that keeps shared ownership of its inputs,
// so a forward pass builds a DAG rooted at the loss. ComputationTape flattens
// that DAG into topological order and replays it backwards. Leaf parameters
// live across passes and accumulate gradients until zero_grad().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "specae/errors.hpp"

namespace specae {

using Rng = std::mt19937_64;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      throw DimensionError("Matrix: " + std::to_string(data.size()) + " values for " +
                           std::to_string(r) + "x" + std::to_string(c));
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
    Matrix m;
    m.rows = rows_in.size();
    m.cols = m.rows ? rows_in.begin()->size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : rows_in) {
      if (r.size() != m.cols) throw DimensionError("Matrix::from_rows: ragged rows");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  const char* op = "leaf";

  Matrix& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Matrix(value.rows, value.cols);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix m) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(m);
    return Tensor(std::move(n));
  }

  /// Leaf that receives gradients.
  static Tensor parameter(Matrix m) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(m);
    n->requires_grad = true;
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v) { return constant(Matrix(1, 1, v)); }

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  double item() const {
    if (rows() != 1 || cols() != 1) throw ContractError("item() on " + shape_str(value()) + " tensor");
    return node_->value.data[0];
  }
  double operator()(std::size_t i, std::size_t j) const { return node_->value(i, j); }

  /// Gradient after backward; zeros if nothing reached this tensor.
  Matrix grad() const {
    if (node_->grad.empty()) return Matrix(rows(), cols());
    return node_->grad;
  }
  void zero_grad() { node_->grad = Matrix(); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline Tensor make_result(Matrix value, std::vector<Tensor> inputs, const char* op,
                          std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& t : inputs) n->requires_grad = n->requires_grad || t.requires_grad();
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& t : inputs) n->inputs.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

inline bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace detail

/// Reachable differentiable nodes of an output, in topological order.
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor& output) : output_(output.node()) {
    if (!output_->requires_grad) return;
    // Iterative post-order DFS; each node is emitted once after all its inputs.
    std::unordered_set<const detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(output_.get(), 0);
    seen.insert(output_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        detail::Node* child = node->inputs[next++].get();
        if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& order() const { return order_; }

  /// Seeds the output gradient with ones and runs every backward rule in reverse order.
  /// Intermediate gradients are released once consumed; leaf gradients accumulate.
  void backward() {
    if (!output_->requires_grad) return;
    Matrix& seed = output_->grad_buffer();
    std::fill(seed.data.begin(), seed.data.end(), 1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      detail::Node* n = *it;
      if (n->backward_fn && !n->grad.empty()) {
        n->backward_fn(*n);
        n->grad = Matrix();
      }
    }
  }

 private:
  std::shared_ptr<detail::Node> output_;
  std::vector<detail::Node*> order_;
};

/// Backpropagates from a 1x1 loss into every parameter on its tape.
inline void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape_str(loss.value()));
  }
  ComputationTape(loss).backward();
}

// ---------------------------------------------------------------------------
// Kernels on plain matrices.

namespace kernel {

/// c += a * b
inline void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.data.data() + i * m;
    const double* arow = a.data.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c += a^T * b
inline void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    const double* brow = b.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c += a * b^T
inline void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    double* crow = c.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: " + shape_str(a) + " * " + shape_str(b));
  Matrix c(a.rows, b.cols);
  gemm_acc(a, b, c);
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

/// Lower-triangular L with L L^T = a; false if a is not numerically positive definite.
inline bool cholesky(const Matrix& a, Matrix& l) {
  const std::size_t n = a.rows;
  l = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

/// Inverse of a from its Cholesky factor.
inline Matrix cholesky_inverse(const Matrix& l) {
  const std::size_t n = l.rows;
  // Solve L Y = I, then L^T X = Y, column by column.
  Matrix inv(n, n);
  std::vector<double> y(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * y[p];
      y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t p = ii + 1; p < n; ++p) s -= l(p, ii) * inv(p, c);
      inv(ii, c) = s / l(ii, ii);
    }
  }
  return inv;
}

inline double cholesky_logdet(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows; ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Differentiable ops.

namespace detail {

enum class Bcast { Same, Row, Col, Scalar };

inline Bcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.same_shape(b)) return Bcast::Same;
  if (b.rows == 1 && b.cols == 1) return Bcast::Scalar;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::Row;
  if (b.cols == 1 && b.rows == a.rows) return Bcast::Col;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

inline std::size_t bindex(Bcast k, std::size_t i, std::size_t j, std::size_t cols) {
  switch (k) {
    case Bcast::Same: return i * cols + j;
    case Bcast::Row: return j;
    case Bcast::Col: return i;
    case Bcast::Scalar: return 0;
  }
  return 0;
}

// Elementwise binary op; b may broadcast as a row, column, or scalar.
// da(x, y, g) and db(x, y, g) return the partials already scaled by g.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Bcast kind = broadcast_kind(av, bv, op);
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j)
      out(i, j) = f(av(i, j), bv.data[bindex(kind, i, j, av.cols)]);
  return make_result(std::move(out), {a, b}, op, [kind, da, db](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    const Matrix& y = self.inputs[1]->value;
    const Matrix& g = self.grad;
    if (wants(self, 0)) {
      Matrix& gx = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
          gx(i, j) += da(x(i, j), y.data[bindex(kind, i, j, x.cols)], g(i, j));
    }
    if (wants(self, 1)) {
      Matrix& gy = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) {
          const std::size_t bi = bindex(kind, i, j, x.cols);
          gy.data[bi] += db(x(i, j), y.data[bi], g(i, j));
        }
    }
  });
}

// Elementwise unary op; d(x, out) is the local derivative.
template <class F, class D>
Tensor unary(const Tensor& a, const char* op, F f, D d) {
  const Matrix& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = f(av.data[i]);
  return make_result(std::move(out), {a}, op, [d](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    const Matrix& y = self.value;
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < x.size(); ++i) gx.data[i] += self.grad.data[i] * d(x.data[i], y.data[i]);
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; }, [](double x, double, double g) { return g * x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(
      a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(
      a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(const Tensor& a) {
  return detail::unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  for (double v : a.value().data)
    if (v < 0.0) throw DomainError("log of negative value " + std::to_string(v));
  return detail::unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

/// The derivative at exactly zero is taken as 0 (a subgradient) so that
/// perfect reconstructions do not poison the backward pass with inf.
inline Tensor sqrt(const Tensor& a) {
  for (double v : a.value().data)
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  return detail::unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
  return detail::unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Matrix out = kernel::matmul(a.value(), b.value());
  return detail::make_result(std::move(out), {a, b}, "matmul", [](detail::Node& self) {
    const Matrix& x = self.inputs[0]->value;
    const Matrix& y = self.inputs[1]->value;
    if (detail::wants(self, 0)) kernel::gemm_nt_acc(self.grad, y, self.inputs[0]->grad_buffer());
    if (detail::wants(self, 1)) kernel::gemm_tn_acc(x, self.grad, self.inputs[1]->grad_buffer());
  });
}

inline Tensor transpose(const Tensor& a) {
  return detail::make_result(kernel::transpose(a.value()), {a}, "transpose", [](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += self.grad(j, i);
  });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return detail::make_result(Matrix(1, 1, s), {a}, "sum", [](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    const double g = self.grad.data[0];
    for (double& v : gx.data) v += g;
  });
}

inline Tensor mean(const Tensor& a) {
  if (a.value().empty()) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// n x c -> n x 1
inline Tensor row_sum(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (double v : av.row(i)) s += v;
    out(i, 0) = s;
  }
  return detail::make_result(std::move(out), {a}, "row_sum", [](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (double& v : gx.row(i)) v += self.grad(i, 0);
  });
}

/// n x c -> 1 x c
inline Tensor col_sum(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) out(0, j) += av(i, j);
  return detail::make_result(std::move(out), {a}, "col_sum", [](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += self.grad(0, j);
  });
}

inline Tensor col_mean(const Tensor& a) {
  if (a.rows() == 0) throw ContractError("col_mean of tensor with no rows");
  return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

/// Columns [begin, end).
inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const Matrix& av = a.value();
  if (begin > end || end > av.cols) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_str(av));
  }
  Matrix out(av.rows, end - begin);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = av(i, j);
  return detail::make_result(std::move(out), {a}, "slice_cols", [begin](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.rows; ++i)
      for (std::size_t j = 0; j < self.grad.cols; ++j) gx(i, j + begin) += self.grad(i, j);
  });
}

inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  const std::size_t n = parts.front().rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw DimensionError("concat_cols: row count mismatch");
    width += p.cols();
  }
  Matrix out(n, width);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p(i, j);
    off += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return detail::make_result(std::move(out), std::move(inputs), "concat_cols", [](detail::Node& self) {
    std::size_t offset = 0;
    for (auto& in : self.inputs) {
      const std::size_t w = in->value.cols;
      if (in->requires_grad) {
        Matrix& gx = in->grad_buffer();
        for (std::size_t i = 0; i < gx.rows; ++i)
          for (std::size_t j = 0; j < w; ++j) gx(i, j) += self.grad(i, offset + j);
      }
      offset += w;
    }
  });
}

inline Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

/// Rows picked by index, in the given order.
inline Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const Matrix& av = a.value();
  Matrix out(index.size(), av.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= av.rows) throw DimensionError("gather_rows: index out of range");
    std::copy_n(av.row(index[r]).begin(), av.cols, out.row(r).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return detail::make_result(std::move(out), {a}, "gather_rows", [idx = std::move(idx)](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto dst = gx.row(idx[r]);
      auto src = self.grad.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  });
}

/// Row-wise softmax.
inline Tensor softmax_rows(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    auto r = av.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < av.cols; ++j) z += (out(i, j) = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < av.cols; ++j) out(i, j) /= z;
  }
  return detail::make_result(std::move(out), {a}, "softmax_rows", [](detail::Node& self) {
    const Matrix& y = self.value;
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) gx(i, j) += y(i, j) * (self.grad(i, j) - dot);
    }
  });
}

/// n x c -> n x 1, log(sum_j exp(a_ij)) with the max shifted out. Entries of -inf are allowed.
inline Tensor logsumexp_rows(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i) {
    auto r = av.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    if (mx == -std::numeric_limits<double>::infinity()) {
      out(i, 0) = mx;
      continue;
    }
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    out(i, 0) = mx + std::log(z);
  }
  return detail::make_result(std::move(out), {a}, "logsumexp_rows", [](detail::Node& self) {
    const Matrix& x = self.inputs[0]->value;
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double lse = self.value(i, 0);
      if (!std::isfinite(lse)) continue;
      for (std::size_t j = 0; j < x.cols; ++j) gx(i, j) += self.grad(i, 0) * std::exp(x(i, j) - lse);
    }
  });
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
inline Tensor inverse_spd(const Tensor& a) {
  Matrix l;
  if (!kernel::cholesky(a.value(), l)) throw NumericalError("inverse_spd: matrix is not positive definite");
  Matrix inv = kernel::cholesky_inverse(l);
  return detail::make_result(std::move(inv), {a}, "inverse_spd", [](detail::Node& self) {
    // d(A^-1) = -A^-1 dA A^-1  =>  grad_A = -Y^T G Y^T
    const Matrix& y = self.value;
    Matrix yt = kernel::transpose(y);
    Matrix tmp = kernel::matmul(yt, self.grad);
    Matrix prod = kernel::matmul(tmp, yt);
    Matrix& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] -= prod.data[i];
  });
}

/// log|A| of a symmetric positive definite matrix via Cholesky.
inline Tensor logdet_spd(const Tensor& a) {
  Matrix l;
  if (!kernel::cholesky(a.value(), l)) throw NumericalError("logdet_spd: matrix is not positive definite");
  const double ld = kernel::cholesky_logdet(l);
  Matrix inv_t = kernel::transpose(kernel::cholesky_inverse(l));
  return detail::make_result(Matrix(1, 1, ld), {a}, "logdet_spd", [inv_t = std::move(inv_t)](detail::Node& self) {
    Matrix& gx = self.inputs[0]->grad_buffer();
    const double g = self.grad.data[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g * inv_t.data[i];
  });
}

/// Inverted dropout: surviving entries are scaled by 1/(1-rate).
inline Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ContractError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  const double s = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = keep(rng) ? s : 0.0;
  return mul(a, Tensor::constant(std::move(mask)));
}

inline Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data) v = nd(rng);
  return m;
}

}  // namespace specae
