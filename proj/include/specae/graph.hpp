#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "specae/errors.hpp"
#include "specae/tensor.hpp"

namespace specae {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unweighted graph with a dense attribute row per node.
///
/// Edges are stored once with first < second, sorted and deduplicated.
/// Self-loops are never stored; normalization adds them.
struct AttributedGraph {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<Edge> edges;
  Matrix attributes;
  std::vector<std::string> labels;  // empty when the dataset carries none
  std::vector<std::string> node_ids;

  bool has_labels() const { return !labels.empty(); }

  std::vector<std::vector<std::size_t>> adjacency_lists() const {
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [u, v] : edges) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    return adj;
  }

  /// Canonicalizes raw edges; self-loops are dropped and their count returned.
  static std::size_t canonical_edges(std::vector<Edge>& raw, std::size_t n) {
    std::size_t loops = 0;
    std::vector<Edge> out;
    out.reserve(raw.size());
    for (auto [u, v] : raw) {
      if (u >= n || v >= n) throw DimensionError("edge endpoint out of range");
      if (u == v) {
        ++loops;
        continue;
      }
      if (u > v) std::swap(u, v);
      out.emplace_back(u, v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    raw = std::move(out);
    return loops;
  }

  static AttributedGraph build(Matrix x, std::vector<Edge> raw_edges, std::vector<std::string> labels = {},
                               std::vector<std::string> ids = {}) {
    AttributedGraph g;
    g.n = x.rows;
    g.m = x.cols;
    if (!labels.empty() && labels.size() != g.n) throw DimensionError("labels do not match node count");
    if (ids.empty()) {
      ids.reserve(g.n);
      for (std::size_t i = 0; i < g.n; ++i) ids.push_back(std::to_string(i));
    }
    if (ids.size() != g.n) throw DimensionError("node ids do not match node count");
    canonical_edges(raw_edges, g.n);
    g.edges = std::move(raw_edges);
    g.attributes = std::move(x);
    g.labels = std::move(labels);
    g.node_ids = std::move(ids);
    return g;
  }
};

struct LoadReport {
  std::size_t dropped_edges = 0;  // endpoints not present in the content file
  std::size_t self_loops = 0;
  std::size_t duplicate_edges = 0;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(where + ": not a number '" + std::string(tok) + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::ostringstream os;
    os << static_cast<long long>(v);
    return os.str();
  }
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a `.content` / `.cites` pair. Citation edges are symmetrized and deduplicated.
inline AttributedGraph load_citation_dataset(const std::string& content_path, const std::string& cites_path,
                                             LoadReport* report = nullptr) {
  std::ifstream content(content_path);
  if (!content) throw ParseError("cannot open " + content_path);

  std::vector<std::string> ids, labels;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t arity = 0;
  bool have_arity = false;
  std::string line;
  for (std::size_t lineno = 1; std::getline(content, line); ++lineno) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    const std::string where = content_path + ":" + std::to_string(lineno);
    if (tok.size() < 3) throw ParseError(where + ": expected id, attributes, label");
    const std::size_t here = tok.size() - 2;
    if (!have_arity) {
      arity = here;
      have_arity = true;
    } else if (here != arity) {
      throw ParseError(where + ": " + std::to_string(here) + " attributes, expected " + std::to_string(arity));
    }
    std::string id(tok.front());
    if (!index.emplace(id, ids.size()).second) throw ParseError(where + ": duplicate node id '" + id + "'");
    ids.push_back(std::move(id));
    for (std::size_t j = 1; j + 1 < tok.size(); ++j) values.push_back(detail::parse_double(tok[j], where));
    labels.emplace_back(tok.back());
  }

  std::ifstream cites(cites_path);
  if (!cites) throw ParseError("cannot open " + cites_path);
  LoadReport rep;
  std::vector<Edge> raw;
  for (std::size_t lineno = 1; std::getline(cites, line); ++lineno) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 2) {
      throw ParseError(cites_path + ":" + std::to_string(lineno) + ": expected two node ids");
    }
    auto a = index.find(std::string(tok[0]));
    auto b = index.find(std::string(tok[1]));
    if (a == index.end() || b == index.end()) {
      ++rep.dropped_edges;
      continue;
    }
    raw.emplace_back(a->second, b->second);
  }
  const std::size_t before = raw.size();
  Matrix x(ids.size(), arity, std::move(values));
  rep.self_loops = AttributedGraph::canonical_edges(raw, ids.size());
  rep.duplicate_edges = before - rep.self_loops - raw.size();
  if (report) *report = rep;
  return AttributedGraph::build(std::move(x), std::move(raw), std::move(labels), std::move(ids));
}

/// Inverse of load_citation_dataset. Graphs without labels are written with label "_".
inline void write_citation_dataset(const AttributedGraph& g, const std::string& content_path,
                                   const std::string& cites_path) {
  std::ofstream content(content_path);
  if (!content) throw ParseError("cannot write " + content_path);
  for (std::size_t i = 0; i < g.n; ++i) {
    content << g.node_ids[i];
    for (double v : g.attributes.row(i)) content << '\t' << detail::format_double(v);
    content << '\t' << (g.has_labels() ? g.labels[i] : std::string("_")) << '\n';
  }
  std::ofstream cites(cites_path);
  if (!cites) throw ParseError("cannot write " + cites_path);
  for (const auto& [u, v] : g.edges) cites << g.node_ids[u] << '\t' << g.node_ids[v] << '\n';
}

/// Symmetric normalized adjacency with self-loops, D^-1/2 (A + I) D^-1/2, in CSR layout.
class PropagationMatrix {
 public:
  struct Csr {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::size_t> col_idx;
    std::vector<double> values;
    std::vector<double> degree;  // D~_ii = 1 + deg(i)
  };

  PropagationMatrix() : csr_(std::make_shared<Csr>()) {}
  explicit PropagationMatrix(std::shared_ptr<const Csr> csr) : csr_(std::move(csr)) {}

  std::size_t n() const { return csr_->n; }
  std::size_t nnz() const { return csr_->values.size(); }
  const std::vector<std::size_t>& row_ptr() const { return csr_->row_ptr; }
  const std::vector<std::size_t>& col_idx() const { return csr_->col_idx; }
  const std::vector<double>& values() const { return csr_->values; }
  const std::vector<double>& degree() const { return csr_->degree; }

  double at(std::size_t i, std::size_t j) const {
    const auto b = csr_->col_idx.begin() + static_cast<std::ptrdiff_t>(csr_->row_ptr[i]);
    const auto e = csr_->col_idx.begin() + static_cast<std::ptrdiff_t>(csr_->row_ptr[i + 1]);
    auto it = std::lower_bound(b, e, j);
    if (it == e || *it != j) return 0.0;
    return csr_->values[static_cast<std::size_t>(it - csr_->col_idx.begin())];
  }

  Matrix dense() const {
    Matrix d(n(), n());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t p = csr_->row_ptr[i]; p < csr_->row_ptr[i + 1]; ++p) d(i, csr_->col_idx[p]) = csr_->values[p];
    return d;
  }

  /// out += S * x
  void multiply_acc(const Matrix& x, Matrix& out) const {
    const std::size_t c = x.cols;
    for (std::size_t i = 0; i < n(); ++i) {
      double* orow = out.data.data() + i * c;
      for (std::size_t p = csr_->row_ptr[i]; p < csr_->row_ptr[i + 1]; ++p) {
        const double w = csr_->values[p];
        const double* xrow = x.data.data() + csr_->col_idx[p] * c;
        for (std::size_t j = 0; j < c; ++j) orow[j] += w * xrow[j];
      }
    }
  }

 private:
  std::shared_ptr<const Csr> csr_;
};

inline PropagationMatrix normalize_propagation(const AttributedGraph& g) {
  auto csr = std::make_shared<PropagationMatrix::Csr>();
  csr->n = g.n;
  auto adj = g.adjacency_lists();
  csr->degree.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    adj[i].push_back(i);
    std::sort(adj[i].begin(), adj[i].end());
    csr->degree[i] = static_cast<double>(adj[i].size());
  }
  csr->row_ptr.reserve(g.n + 1);
  csr->row_ptr.push_back(0);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j : adj[i]) {
      csr->col_idx.push_back(j);
      csr->values.push_back(1.0 / (std::sqrt(csr->degree[i]) * std::sqrt(csr->degree[j])));
    }
    csr->row_ptr.push_back(csr->col_idx.size());
  }
  return PropagationMatrix(std::move(csr));
}

/// S * X. The backward rule multiplies by S^T = S.
inline Tensor propagate(const PropagationMatrix& s, const Tensor& x) {
  if (x.rows() != s.n()) {
    throw DimensionError("propagate: operator is " + std::to_string(s.n()) + " nodes, input has " +
                         std::to_string(x.rows()) + " rows");
  }
  Matrix out(x.rows(), x.cols());
  s.multiply_acc(x.value(), out);
  return detail::make_result(std::move(out), {x}, "propagate", [s](detail::Node& self) {
    s.multiply_acc(self.grad, self.inputs[0]->grad_buffer());
  });
}

}  // namespace specae
