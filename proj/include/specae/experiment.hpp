#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "specae/bench.hpp"
#include "specae/checkpoint.hpp"
#include "specae/config.hpp"
#include "specae/errors.hpp"
#include "specae/graph.hpp"
#include "specae/metrics.hpp"
#include "specae/trainer.hpp"

namespace specae {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kSbmStream = 5;

/// One end-to-end run: a data source, an injection ratio and a training configuration.
struct ExperimentSpec {
  std::string dataset;  // name under SPECAE_DATA_DIR, a path prefix, or a directory
  bool synthetic = false;
  SbmSpec sbm;
  double inject_ratio = 0.05;
  TrainConfig train;
  std::string out_dir = "specae_out";

  void validate() const {
    if (synthetic == !dataset.empty()) throw ContractError("exactly one of --dataset or --synthetic must be given");
    if (inject_ratio < 0.0 || inject_ratio >= 1.0) throw ContractError("inject-ratio must lie in [0, 1)");
    train.validate();
  }

  bool apply(const std::string& key, const std::string& v) {
    if (train.apply(key, v)) return true;
    if (key == "dataset") dataset = v;
    else if (key == "synthetic") synthetic = detail::to_bool(key, v);
    else if (key == "communities") sbm.communities = detail::to_uint(key, v);
    else if (key == "nodes-per") sbm.nodes_per = detail::to_uint(key, v);
    else if (key == "p-in") sbm.p_in = detail::to_double(key, v);
    else if (key == "p-out") sbm.p_out = detail::to_double(key, v);
    else if (key == "attr-dim") sbm.attr_dim = detail::to_uint(key, v);
    else if (key == "mean-scale") sbm.mean_scale = detail::to_double(key, v);
    else if (key == "inject-ratio") inject_ratio = detail::to_double(key, v);
    else if (key == "out") out_dir = v;
    else return false;
    return true;
  }

  void apply_all(const KeyValues& kvs) {
    for (const auto& [k, v] : kvs)
      if (!apply(k, v)) throw ParseError("unknown config key '" + k + "'");
  }
};

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Resolves `.content` / `.cites` paths for --dataset.
inline std::pair<fs::path, fs::path> resolve_dataset(const std::string& dataset) {
  auto pair_at = [](const fs::path& prefix) -> std::optional<std::pair<fs::path, fs::path>> {
    fs::path c = prefix, e = prefix;
    c += ".content";
    e += ".cites";
    if (fs::exists(c) && fs::exists(e)) return std::make_pair(c, e);
    return std::nullopt;
  };
  auto in_dir = [&](const fs::path& dir) -> std::optional<std::pair<fs::path, fs::path>> {
    if (!fs::is_directory(dir)) return std::nullopt;
    if (auto p = pair_at(dir / dir.filename())) return p;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".content") {
        fs::path prefix = entry.path();
        prefix.replace_extension();
        if (auto p = pair_at(prefix)) return p;
      }
    }
    return std::nullopt;
  };
  if (auto p = pair_at(dataset)) return *p;
  if (auto p = in_dir(dataset)) return *p;
  if (const char* root = std::getenv("SPECAE_DATA_DIR")) {
    const fs::path base(root);
    if (auto p = pair_at(base / dataset)) return *p;
    if (auto p = in_dir(base / dataset)) return *p;
  }
  throw ParseError("dataset '" + dataset + "' not found (checked path prefix, directory and SPECAE_DATA_DIR)");
}

/// The injected graph, its ground truth and the train/eval split shared by every variant.
struct PreparedData {
  AttributedGraph graph;
  InjectionRecord injection;
  std::vector<bool> truth;
  Split split;
  LoadReport load;
};

/// Semi-supervised runs split first and inject only into eval nodes so the training nodes
/// stay clean; unsupervised runs inject anywhere and train on a uniform draw.
inline PreparedData prepare_data(const ExperimentSpec& spec) {
  spec.validate();
  const TrainConfig& cfg = spec.train;
  PreparedData d;
  AttributedGraph clean;
  if (spec.synthetic) {
    Rng sbm_rng = stream_rng(cfg.seed, kSbmStream);
    clean = generate_sbm(spec.sbm, sbm_rng);
  } else {
    auto [content, cites] = resolve_dataset(spec.dataset);
    clean = load_citation_dataset(content.string(), cites.string(), &d.load);
  }
  Rng split_rng = stream_rng(cfg.seed, kSplitStream);
  Rng inject_rng = stream_rng(cfg.seed, kInjectStream);
  if (cfg.mode == TrainMode::SemiSupervised) {
    d.split = draw_split(clean.n, cfg, {}, split_rng);
    Injected inj = inject_anomalies(clean, spec.inject_ratio, cfg.seed, inject_rng, d.split.eval);
    d.graph = std::move(inj.graph);
    d.injection = std::move(inj.record);
  } else {
    Injected inj = inject_anomalies(clean, spec.inject_ratio, cfg.seed, inject_rng);
    d.graph = std::move(inj.graph);
    d.injection = std::move(inj.record);
    d.split = draw_split(clean.n, cfg, {}, split_rng);
  }
  d.truth = d.injection.truth(d.graph.n);
  return d;
}

struct ExperimentReport {
  TrainResult result;
  MetricReport metrics;
  Confusion at_ratio;  // top (#anomalies among eval nodes) flagged
  InjectionRecord injection;
  std::vector<bool> truth;
};

inline ExperimentReport evaluate(TrainResult result, const PreparedData& data) {
  ExperimentReport rep;
  rep.metrics = evaluate_ranking(result.scored.ranking, result.scored.energy, data.truth);
  std::size_t anomalies = 0;
  for (std::size_t i : result.scored.ranking) anomalies += data.truth[i] ? 1 : 0;
  rep.at_ratio = confusion_at(result.scored.ranking, data.truth, anomalies);
  rep.result = std::move(result);
  rep.injection = data.injection;
  rep.truth = data.truth;
  return rep;
}

inline nlohmann::ordered_json metrics_json(const ExperimentSpec& spec, const PreparedData& data,
                                           const ExperimentReport& rep) {
  using nlohmann::ordered_json;
  const EmbeddingLayout layout = SpecAEModel::layout_for(spec.train);
  ordered_json j;
  j["ablation"] = to_string(spec.train.ablation);
  j["alpha"] = spec.train.alpha;
  j["mode"] = to_string(spec.train.mode);
  j["seed"] = spec.train.seed;
  j["z_width"] = layout.total();
  j["z_layout"] = {{"z_x", layout.widths[0]}, {"z_g", layout.widths[1]}, {"z_x_error", layout.widths[2]},
                   {"z_g_error", layout.widths[3]}};
  j["dataset"] = {{"source", spec.synthetic ? std::string("synthetic") : spec.dataset},
                  {"nodes", data.graph.n},
                  {"attributes", data.graph.m},
                  {"edges", data.graph.edges.size()},
                  {"dropped_edges", data.load.dropped_edges}};
  j["injection"] = {{"ratio", spec.inject_ratio},
                    {"global", rep.injection.global_ids.size()},
                    {"community", rep.injection.community_ids.size()},
                    {"relaxations", rep.injection.relaxations}};
  j["train_nodes"] = rep.result.split.train.size();
  j["eval_nodes"] = rep.result.split.eval.size();
  ordered_json acc;
  for (const auto& [k, v] : rep.metrics.accuracy_at) acc[std::to_string(k)] = v;
  j["accuracy_at_k"] = acc;
  j["auc"] = rep.metrics.auc();
  j["at_anomaly_ratio"] = {{"accuracy", rep.at_ratio.accuracy},
                           {"precision", rep.at_ratio.precision},
                           {"recall", rep.at_ratio.recall},
                           {"f1", rep.at_ratio.f1}};
  ordered_json config;
  for (const auto& [k, v] : spec.train.to_key_values()) config[k] = v;
  j["config"] = config;
  ordered_json trace = ordered_json::array();
  for (std::size_t e = 0; e < rep.result.trace.size(); ++e) {
    const LossTerms& t = rep.result.trace[e];
    trace.push_back({{"epoch", e},
                     {"total", t.total},
                     {"recon_attr", t.recon_attr},
                     {"recon_graph", t.recon_graph},
                     {"energy", t.energy},
                     {"cov_penalty", t.cov_penalty},
                     {"kl", t.kl}});
  }
  j["loss_trace"] = trace;
  return j;
}

inline std::string ranking_csv(const AttributedGraph& g, const ExperimentReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "node_id,energy,rank,truth\n";
  const auto& ranking = rep.result.scored.ranking;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const std::size_t i = ranking[r];
    os << g.node_ids[i] << ',' << rep.result.scored.energy[i] << ',' << r + 1 << ',' << (rep.truth[i] ? 1 : 0) << '\n';
  }
  return os.str();
}

/// Writes metrics.json, ranking.csv, roc.csv, injection.txt and model.ckpt into `dir`.
inline void write_report_files(const fs::path& dir, const ExperimentSpec& spec, const PreparedData& data,
                               const ExperimentReport& rep) {
  fs::create_directories(dir);
  write_file_atomic(dir / "metrics.json", metrics_json(spec, data, rep).dump(2) + "\n");
  write_file_atomic(dir / "ranking.csv", ranking_csv(data.graph, rep));
  std::ostringstream roc;
  roc.precision(17);
  write_roc_csv(roc, rep.metrics.roc);
  write_file_atomic(dir / "roc.csv", roc.str());
  std::ostringstream inj;
  write_injection(inj, rep.injection, data.graph);
  write_file_atomic(dir / "injection.txt", inj.str());
  write_file_atomic(dir / "model.ckpt",
                    checkpoint_string(rep.result.model, rep.result.gmm, spec.train, data.graph.m));
}

inline ExperimentReport run_on(const ExperimentSpec& spec, const PreparedData& data) {
  return evaluate(train(data.graph, spec.train, data.split), data);
}

/// Load or generate, inject, train, score, evaluate and write the report files.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  PreparedData data = prepare_data(spec);
  ExperimentReport rep = run_on(spec, data);
  write_report_files(spec.out_dir, spec, data, rep);
  return rep;
}

struct AblationRow {
  std::string variant;
  Ablation ablation = Ablation::Full;
  double alpha = 0.7;
  std::size_t z_width = 0;
  Confusion at_ratio;
  double auc = 0.0;
};

/// Variants compared on one injected graph: full, full with alpha = 1, S, N, nr.
inline std::vector<std::pair<std::string, TrainConfig>> ablation_variants(const TrainConfig& base) {
  std::vector<std::pair<std::string, TrainConfig>> out;
  auto with = [&](Ablation a, double alpha) {
    TrainConfig c = base;
    c.ablation = a;
    c.alpha = alpha;
    return c;
  };
  out.emplace_back("full", with(Ablation::Full, base.alpha));
  out.emplace_back("alpha=1", with(Ablation::Full, 1.0));
  out.emplace_back("S", with(Ablation::S, base.alpha));
  out.emplace_back("N", with(Ablation::N, base.alpha));
  out.emplace_back("nr", with(Ablation::NR, base.alpha));
  return out;
}

/// Runs every variant concurrently (each in its own subdirectory) and writes ablation.csv
/// and ablation.json. Precision/recall/F1 flag as many nodes as there are anomalies.
inline std::vector<AblationRow> run_ablation_suite(const ExperimentSpec& spec, bool write_files = true) {
  const PreparedData data = prepare_data(spec);
  auto variants = ablation_variants(spec.train);
  std::vector<std::future<ExperimentReport>> jobs;
  std::vector<ExperimentSpec> specs;
  for (const auto& [name, cfg] : variants) {
    ExperimentSpec s = spec;
    s.train = cfg;
    s.out_dir = (fs::path(spec.out_dir) / name).string();
    specs.push_back(std::move(s));
  }
  for (const auto& s : specs) jobs.push_back(std::async(std::launch::async, [&s, &data] { return run_on(s, data); }));

  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ExperimentReport rep = jobs[i].get();
    if (write_files) write_report_files(specs[i].out_dir, specs[i], data, rep);
    rows.push_back({variants[i].first, specs[i].train.ablation, specs[i].train.alpha,
                    SpecAEModel::layout_for(specs[i].train).total(), rep.at_ratio, rep.metrics.auc()});
  }
  if (write_files) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "variant,ablation,alpha,z_width,accuracy,precision,recall,f1,auc\n";
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      csv << r.variant << ',' << to_string(r.ablation) << ',' << r.alpha << ',' << r.z_width << ','
          << r.at_ratio.accuracy << ',' << r.at_ratio.precision << ',' << r.at_ratio.recall << ',' << r.at_ratio.f1
          << ',' << r.auc << '\n';
      j.push_back({{"variant", r.variant},
                   {"ablation", to_string(r.ablation)},
                   {"alpha", r.alpha},
                   {"z_width", r.z_width},
                   {"accuracy", r.at_ratio.accuracy},
                   {"precision", r.at_ratio.precision},
                   {"recall", r.at_ratio.recall},
                   {"f1", r.at_ratio.f1},
                   {"auc", r.auc}});
    }
    fs::create_directories(spec.out_dir);
    write_file_atomic(fs::path(spec.out_dir) / "ablation.csv", csv.str());
    write_file_atomic(fs::path(spec.out_dir) / "ablation.json", j.dump(2) + "\n");
  }
  return rows;
}

}  // namespace specae
