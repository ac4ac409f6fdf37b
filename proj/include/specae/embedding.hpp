#pragma once

#include <array>
#include <numeric>
#include <vector>

#include "specae/errors.hpp"
#include "specae/tensor.hpp"

namespace specae {

inline constexpr double kDivGuard = 1e-12;

/// Per-node reconstruction features, n x 2:
///   col 0: ||x - xhat|| / (||x|| + eps)
///   col 1: <x, xhat> / ((||x|| + eps)(||xhat|| + eps))
inline Tensor reconstruction_features(const Tensor& x, const Tensor& xhat) {
  if (!x.value().same_shape(xhat.value())) {
    throw DimensionError("reconstruction_features: " + shape_str(x.value()) + " vs " + shape_str(xhat.value()));
  }
  Tensor x_norm = add_scalar(sqrt(row_sum(square(x))), kDivGuard);
  Tensor xhat_norm = add_scalar(sqrt(row_sum(square(xhat))), kDivGuard);
  Tensor relative = div(sqrt(row_sum(square(sub(x, xhat)))), x_norm);
  Tensor cosine = div(div(row_sum(mul(x, xhat)), x_norm), xhat_norm);
  return concat_cols({relative, cosine});
}

enum class Segment : std::size_t { AttributeCode = 0, GraphCode = 1, AttributeError = 2, GraphError = 3 };

/// Widths of [Z_X | Z_G | Z_Xerror | Z_Gerror]; an ablated segment has width 0.
struct EmbeddingLayout {
  std::array<std::size_t, 4> widths{};

  std::size_t total() const { return std::accumulate(widths.begin(), widths.end(), std::size_t{0}); }
  std::size_t width(Segment s) const { return widths[static_cast<std::size_t>(s)]; }
  std::size_t offset(Segment s) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(s); ++i) off += widths[i];
    return off;
  }
};

struct JointEmbedding {
  Tensor z;
  EmbeddingLayout layout;

  /// Recovers one segment of z; empty tensor for an ablated segment.
  Tensor segment(Segment s) const {
    if (layout.width(s) == 0) return {};
    return slice_cols(z, layout.offset(s), layout.offset(s) + layout.width(s));
  }
};

/// Concatenates the four parts in fixed order. Undefined tensors are skipped and recorded with width 0.
inline JointEmbedding assemble(const Tensor& z_x, const Tensor& z_g, const Tensor& err_x, const Tensor& err_g) {
  std::vector<Tensor> parts;
  JointEmbedding out;
  const std::array<const Tensor*, 4> in{&z_x, &z_g, &err_x, &err_g};
  std::size_t rows = 0;
  bool have_rows = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!in[i]->defined()) continue;
    if (have_rows && in[i]->rows() != rows) throw DimensionError("assemble: segments disagree on row count");
    rows = in[i]->rows();
    have_rows = true;
    out.layout.widths[i] = in[i]->cols();
    parts.push_back(*in[i]);
  }
  if (parts.empty()) throw ContractError("assemble: every segment is ablated");
  out.z = concat_cols(std::span<const Tensor>(parts));
  return out;
}

}  // namespace specae
