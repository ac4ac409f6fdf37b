#pragma once

// Text checkpoint, one record per line:
//
//   specae-checkpoint 1
//   config <key>=<value>          (one per TrainConfig field)
//   attr_dim <m>
//   tensor <name> <rows> <cols> <v0> <v1> ...   (row-major, shortest round-trip decimal)
//
// Network weights use their parameter names; the mixture is stored as
// gmm.weights (1 x K), gmm.means (K x d) and gmm.cov<k> (d x d).

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "specae/config.hpp"
#include "specae/errors.hpp"
#include "specae/gmm.hpp"
#include "specae/model.hpp"

namespace specae {

inline constexpr const char* kCheckpointMagic = "specae-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  std::size_t attr_dim = 0;
  SpecAEModel model;
  GmmParams gmm;
};

namespace detail {

inline void write_tensor(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "tensor " << name << ' ' << m.rows << ' ' << m.cols;
  char buf[32];
  for (double v : m.data) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    os << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
  }
  os << '\n';
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const SpecAEModel& model, const GmmParams& gmm, const TrainConfig& cfg,
                             std::size_t attr_dim) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  for (const auto& [k, v] : cfg.to_key_values()) os << "config " << k << '=' << v << '\n';
  os << "attr_dim " << attr_dim << '\n';
  for (const auto& p : model.parameters()) detail::write_tensor(os, p.name, p.tensor.value());
  detail::write_tensor(os, "gmm.weights", Matrix(1, gmm.weights.size(), gmm.weights));
  detail::write_tensor(os, "gmm.means", gmm.means);
  for (std::size_t k = 0; k < gmm.covariances.size(); ++k)
    detail::write_tensor(os, "gmm.cov" + std::to_string(k), gmm.covariances[k]);
}

inline std::string checkpoint_string(const SpecAEModel& model, const GmmParams& gmm, const TrainConfig& cfg,
                                     std::size_t attr_dim) {
  std::ostringstream os;
  write_checkpoint(os, model, gmm, cfg, attr_dim);
  return os.str();
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: empty input");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kCheckpointMagic) throw ParseError("checkpoint: bad magic");
    if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  std::map<std::string, Matrix> tensors;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    const std::string where = "checkpoint:" + std::to_string(lineno);
    if (kind == "config") {
      std::string kv;
      ls >> kv;
      const auto eq = kv.find('=');
      if (eq == std::string::npos || !ck.config.apply(kv.substr(0, eq), kv.substr(eq + 1))) {
        throw ParseError(where + ": bad config record");
      }
    } else if (kind == "attr_dim") {
      ls >> ck.attr_dim;
    } else if (kind == "tensor") {
      std::string name;
      std::size_t r = 0, c = 0;
      if (!(ls >> name >> r >> c)) throw ParseError(where + ": bad tensor header");
      std::vector<double> values(r * c);
      for (double& v : values) {
        std::string tok;
        if (!(ls >> tok)) throw ParseError(where + ": tensor " + name + " is truncated");
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc()) throw ParseError(where + ": bad value in " + name);
      }
      tensors.emplace(name, Matrix(r, c, std::move(values)));
    } else {
      throw ParseError(where + ": unknown record '" + kind + "'");
    }
  }
  if (ck.attr_dim == 0) throw ParseError("checkpoint: missing attr_dim");

  Rng unused(0);
  ck.model = SpecAEModel::init(ck.config, ck.attr_dim, unused);
  for (auto& p : ck.model.parameters()) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw ParseError("checkpoint: missing tensor " + p.name);
    if (!it->second.same_shape(p.tensor.value())) throw ParseError("checkpoint: shape mismatch for " + p.name);
    p.tensor.mutable_value() = it->second;
  }
  auto need = [&](const std::string& name) -> const Matrix& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParseError("checkpoint: missing tensor " + name);
    return it->second;
  };
  ck.gmm.weights = need("gmm.weights").data;
  ck.gmm.means = need("gmm.means");
  for (std::size_t k = 0; k < ck.gmm.weights.size(); ++k) ck.gmm.covariances.push_back(need("gmm.cov" + std::to_string(k)));
  return ck;
}

}  // namespace specae
