#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "specae/errors.hpp"

namespace specae {

/// Number of nodes flagged when the top k_percent of n are marked anomalous.
inline std::size_t flagged_count(std::size_t n, double k_percent) {
  return static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(n) / 100.0 - 1e-9));
}

/// Overall classification accuracy when the top k_percent of the ranking is flagged.
/// `truth` is indexed by node id; `ranking` lists eval node ids, most anomalous first.
inline double accuracy_at_k(std::span<const std::size_t> ranking, const std::vector<bool>& truth, double k_percent) {
  if (ranking.empty()) throw ContractError("accuracy_at_k: empty ranking");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ContractError("accuracy_at_k: k_percent must lie in (0, 100]");
  const std::size_t flagged = flagged_count(ranking.size(), k_percent);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const bool predicted = r < flagged;
    if (predicted == truth.at(ranking[r])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ranking.size());
}

struct Confusion {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Flags the first `flagged` ranked nodes.
inline Confusion confusion_at(std::span<const std::size_t> ranking, const std::vector<bool>& truth,
                              std::size_t flagged) {
  if (ranking.empty()) throw ContractError("confusion_at: empty ranking");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const bool predicted = r < flagged;
    const bool actual = truth.at(ranking[r]);
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  Confusion c;
  c.accuracy = static_cast<double>(tp + tn) / static_cast<double>(ranking.size());
  c.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  c.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  return c;
}

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (false positive rate, true positive rate)
  double auc = 0.0;
};

/// AUC as the Mann-Whitney statistic with tied pairs counting one half; one ROC point per
/// distinct score threshold, from (0,0) to (1,1).
inline RocCurve roc_auc(std::span<const double> scores, std::span<const bool> truth) {
  if (scores.size() != truth.size()) throw DimensionError("roc_auc: scores and truth differ in length");
  const std::size_t pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) throw ContractError("roc_auc: need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the trapezoid area in (fp, tp) counts
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, tp_group = 0, fp_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      truth[order[j]] ? ++tp_group : ++fp_group;
      ++j;
    }
    area2 += static_cast<double>(fp_group) * static_cast<double>(2 * tp + tp_group);
    tp += tp_group;
    fp += fp_group;
    roc.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos));
    i = j;
  }
  roc.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

inline RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& truth) {
  // std::vector<bool> is bit-packed; copy into contiguous storage for the span.
  auto flat = std::make_unique<bool[]>(truth.size());
  std::copy(truth.begin(), truth.end(), flat.get());
  return roc_auc(scores, std::span<const bool>(flat.get(), truth.size()));
}

inline constexpr double kAccuracyKs[] = {5.0, 10.0, 15.0, 20.0};

struct MetricReport {
  std::map<int, double> accuracy_at;  // K percent -> accuracy
  RocCurve roc;
  double auc() const { return roc.auc; }
};

/// Metrics over eval nodes. `energy` and `truth` are indexed by node id.
inline MetricReport evaluate_ranking(std::span<const std::size_t> ranking, std::span<const double> energy,
                                     const std::vector<bool>& truth) {
  MetricReport rep;
  for (double k : kAccuracyKs) rep.accuracy_at[static_cast<int>(k)] = accuracy_at_k(ranking, truth, k);
  std::vector<double> s;
  std::vector<bool> t;
  for (std::size_t i : ranking) {
    s.push_back(energy[i]);
    t.push_back(truth.at(i));
  }
  rep.roc = roc_auc(s, t);
  return rep;
}

/// Line-oriented: `accuracy@<K> <value>` per K, then `auc <value>`, then `roc_points <count>`.
inline void write_metric_report(std::ostream& os, const MetricReport& r) {
  os << "specae-metrics 1\n";
  for (const auto& [k, v] : r.accuracy_at) os << "accuracy@" << k << ' ' << v << '\n';
  os << "auc " << r.auc() << '\n';
  os << "roc_points " << r.roc.points.size() << '\n';
}

inline void write_roc_csv(std::ostream& os, const RocCurve& roc) {
  os << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.points) os << fpr << ',' << tpr << '\n';
}

}  // namespace specae
