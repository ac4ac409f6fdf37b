#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "specae/errors.hpp"
#include "specae/graph.hpp"
#include "specae/tensor.hpp"

namespace specae {

// ---------------------------------------------------------------------------
// Synthetic attributed graphs.

struct SbmSpec {
  std::size_t communities = 3;
  std::size_t nodes_per = 100;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t attr_dim = 50;
  double mean_scale = 4.0;  // stddev of each community-mean entry
};

/// Stochastic block model. Each community draws a mean vector with N(0, mean_scale^2)
/// entries; node attributes are that mean plus unit Gaussian noise. Labels are community ids.
inline AttributedGraph generate_sbm(const SbmSpec& spec, Rng& rng) {
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ContractError("generate_sbm: need 0 <= p_out < p_in <= 1");
  }
  const std::size_t n = spec.communities * spec.nodes_per;
  std::vector<std::size_t> block(n);
  for (std::size_t i = 0; i < n; ++i) block[i] = i / spec.nodes_per;

  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix means(spec.communities, spec.attr_dim);
  for (double& v : means.data) v = spec.mean_scale * nd(rng);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < (block[i] == block[j] ? spec.p_in : spec.p_out)) edges.emplace_back(i, j);

  Matrix x(n, spec.attr_dim);
  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.attr_dim; ++j) x(i, j) = means(block[i], j) + nd(rng);
    labels[i] = std::to_string(block[i]);
  }
  return AttributedGraph::build(std::move(x), std::move(edges), std::move(labels));
}

// ---------------------------------------------------------------------------
// Anomaly injection.

inline constexpr double kLowCorrelation = 0.1;

struct InjectionRecord {
  std::vector<std::size_t> global_ids;
  std::vector<std::size_t> community_ids;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::size_t relaxations = 0;  // times the correlation threshold was loosened

  std::vector<bool> truth(std::size_t n) const {
    std::vector<bool> t(n, false);
    for (std::size_t i : global_ids) t[i] = true;
    for (std::size_t i : community_ids) t[i] = true;
    return t;
  }

  std::size_t total() const { return global_ids.size() + community_ids.size(); }
};

struct InjectionOptions {
  std::vector<std::size_t> candidates;  // empty: every node
  std::vector<std::size_t> exclude;     // never selected, never used as a source row
  double low_correlation = kLowCorrelation;
  std::size_t max_retries = 64;
};

struct Injected {
  AttributedGraph graph;
  InjectionRecord record;
};

namespace detail {

inline std::vector<std::size_t> eligible(std::size_t n, const InjectionOptions& opt) {
  std::vector<bool> banned(n, false);
  for (std::size_t i : opt.exclude) banned.at(i) = true;
  std::vector<std::size_t> out;
  if (opt.candidates.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      if (!banned[i]) out.push_back(i);
  } else {
    for (std::size_t i : opt.candidates)
      if (!banned.at(i)) out.push_back(i);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

inline std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t m, Rng& rng, const char* who) {
  if (m > pool.size()) throw ContractError(std::string(who) + ": not enough eligible nodes");
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

}  // namespace detail

/// Mean over non-zero rows of (sum|x|)^2 / (m sum x^2). For 0/1 rows this is exactly nnz/m.
inline double attribute_density(const Matrix& x) {
  double acc = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double l1 = 0.0, l2 = 0.0;
    for (double v : x.row(i)) {
      l1 += std::abs(v);
      l2 += v * v;
    }
    if (l2 == 0.0) continue;
    acc += l1 * l1 / (static_cast<double>(x.cols) * l2);
    ++rows;
  }
  return rows ? acc / static_cast<double>(rows) : 0.0;
}

/// Cosine between a bag-of-words row (equal weight on `words`) and `row`.
inline double bag_cosine(std::span<const std::size_t> words, std::span<const double> row) {
  const double norm = detail::row_norm(row);
  if (norm == 0.0 || words.empty()) return 0.0;
  double dot = 0.0;
  for (std::size_t w : words) dot += row[w];
  return dot / (std::sqrt(static_cast<double>(words.size())) * norm);
}

/// Global anomalies: m nodes receive a fresh bag-of-words row whose cosine with every
/// original row in the node's closed neighborhood is below the correlation threshold.
/// The bag size matches the dataset's density; for 0/1 data the entries are 1, otherwise
/// they are scaled so the row norm equals the mean row norm.
inline Injected inject_global(const AttributedGraph& g, std::size_t m, Rng& rng, const InjectionOptions& opt = {}) {
  Injected out{g, {}};
  if (m == 0) return out;
  if (m >= g.n) throw ContractError("inject_global: m must be below the node count");
  const Matrix& x = g.attributes;
  const auto bag = static_cast<std::size_t>(
      std::clamp<double>(std::round(attribute_density(x) * static_cast<double>(g.m)), 1.0, static_cast<double>(g.m)));
  const bool binary = std::all_of(x.data.begin(), x.data.end(), [](double v) { return v == 0.0 || v == 1.0; });
  double mean_norm = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) mean_norm += detail::row_norm(x.row(i));
  mean_norm /= static_cast<double>(g.n);
  const double value = binary ? 1.0 : mean_norm / std::sqrt(static_cast<double>(bag));

  const auto adj = g.adjacency_lists();
  out.record.global_ids = detail::choose(detail::eligible(g.n, opt), m, rng, "inject_global");
  std::vector<std::size_t> dictionary(g.m);
  std::iota(dictionary.begin(), dictionary.end(), std::size_t{0});
  for (std::size_t node : out.record.global_ids) {
    std::vector<std::size_t> hood = adj[node];
    hood.push_back(node);
    double threshold = opt.low_correlation;
    std::vector<std::size_t> words;
    for (;;) {
      bool ok = false;
      for (std::size_t attempt = 0; attempt < opt.max_retries && !ok; ++attempt) {
        std::shuffle(dictionary.begin(), dictionary.end(), rng);
        words.assign(dictionary.begin(), dictionary.begin() + static_cast<std::ptrdiff_t>(bag));
        ok = std::all_of(hood.begin(), hood.end(),
                         [&](std::size_t v) { return bag_cosine(words, x.row(v)) < threshold; });
      }
      if (ok) break;
      threshold *= 1.5;
      ++out.record.relaxations;
    }
    auto dst = out.graph.attributes.row(node);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t w : words) dst[w] = value;
  }
  return out;
}

/// Community anomalies: m nodes take the attribute row of a random node with a different
/// class label. Both the anomalies and their source rows come from the eligible pool
/// (candidates minus exclusions). Edges are untouched.
inline Injected inject_community(const AttributedGraph& g, std::size_t m, Rng& rng, const InjectionOptions& opt = {}) {
  Injected out{g, {}};
  if (m == 0) return out;
  if (!g.has_labels()) throw UnsupportedError("inject_community: dataset has no class labels");
  if (m >= g.n) throw ContractError("inject_community: m must be below the node count");
  if (std::all_of(g.labels.begin(), g.labels.end(), [&](const std::string& l) { return l == g.labels.front(); })) {
    throw UnsupportedError("inject_community: dataset has a single class");
  }
  const std::vector<std::size_t> pool = detail::eligible(g.n, opt);
  out.record.community_ids = detail::choose(pool, m, rng, "inject_community");
  for (std::size_t node : out.record.community_ids) {
    std::vector<std::size_t> sources;
    for (std::size_t j : pool)
      if (g.labels[j] != g.labels[node]) sources.push_back(j);
    if (sources.empty()) throw UnsupportedError("inject_community: no node with a different label");
    std::uniform_int_distribution<std::size_t> pick(0, sources.size() - 1);
    const std::size_t src = sources[pick(rng)];
    auto from = g.attributes.row(src);
    std::copy(from.begin(), from.end(), out.graph.attributes.row(node).begin());
  }
  return out;
}

/// Equal numbers of both anomaly types, floor(ratio * n / 2) each, drawn from `candidates`
/// (every node when empty). Community rows are copied from non-anomalous candidates.
inline Injected inject_anomalies(const AttributedGraph& g, double ratio, std::uint64_t seed, Rng& rng,
                                 std::vector<std::size_t> candidates = {}) {
  if (ratio < 0.0 || ratio >= 1.0) throw ContractError("inject_anomalies: ratio must lie in [0, 1)");
  const auto per_type = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(g.n) / 2.0));
  InjectionOptions opt;
  opt.candidates = std::move(candidates);
  Injected global = inject_global(g, per_type, rng, opt);
  opt.exclude = global.record.global_ids;
  Injected community = inject_community(global.graph, per_type, rng, opt);
  community.record.global_ids = global.record.global_ids;
  community.record.relaxations = global.record.relaxations;
  community.record.ratio = ratio;
  community.record.seed = seed;
  return community;
}

/// Line-oriented record:
///   specae-injection 1 / ratio / seed / relaxations / global <count> <ids...> / community <count> <ids...>
inline void write_injection(std::ostream& os, const InjectionRecord& r, const AttributedGraph& g) {
  os << "specae-injection 1\n";
  os << "ratio " << r.ratio << '\n';
  os << "seed " << r.seed << '\n';
  os << "relaxations " << r.relaxations << '\n';
  os << "global " << r.global_ids.size() << '\n';
  for (std::size_t i : r.global_ids) os << "  " << g.node_ids[i] << '\n';
  os << "community " << r.community_ids.size() << '\n';
  for (std::size_t i : r.community_ids) os << "  " << g.node_ids[i] << '\n';
}

}  // namespace specae
