#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "specae/errors.hpp"

namespace specae {

enum class Ablation { Full, S, N, NR };
enum class TrainMode { SemiSupervised, Unsupervised };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::S: return "S";
    case Ablation::N: return "N";
    case Ablation::NR: return "nr";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "S") return Ablation::S;
  if (s == "N") return Ablation::N;
  if (s == "nr") return Ablation::NR;
  throw ParseError("unknown ablation '" + s + "' (expected full, S, N, nr)");
}

inline const char* to_string(TrainMode m) { return m == TrainMode::SemiSupervised ? "semi" : "unsup"; }

inline TrainMode parse_mode(const std::string& s) {
  if (s == "semi") return TrainMode::SemiSupervised;
  if (s == "unsup") return TrainMode::Unsupervised;
  throw ParseError("unknown mode '" + s + "' (expected semi or unsup)");
}

/// Ordered key=value pairs. Blank lines and lines starting with '#' are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline KeyValues parse_key_values(std::istream& in, const std::string& source = "config") {
  KeyValues out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source + ":" + std::to_string(lineno) + ": expected key=value");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path);
  return parse_key_values(in, path);
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ParseError(key + ": not a number '" + v + "'");
  return out;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ParseError(key + ": not a non-negative integer '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(key + ": not a boolean '" + v + "'");
}

inline std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace detail

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.005;
  double lambda_kl = 1.0;
  double alpha = 0.7;
  std::size_t k_components = 3;
  std::size_t d1 = 8;
  std::size_t d2 = 8;
  std::size_t hidden = 64;
  std::size_t estimation_hidden = 10;
  double estimation_dropout = 0.5;
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::Full;
  double train_fraction = 0.5;
  TrainMode mode = TrainMode::SemiSupervised;
  bool weights_inside_activation = false;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda_kl < 0) throw ContractError("loss weights must be non-negative");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ContractError("train-fraction must lie in (0, 1]");
    if (alpha < 0.0 || alpha > 1.0) throw ContractError("alpha must lie in [0, 1]");
    if (k_components == 0 || d1 == 0 || d2 == 0 || hidden == 0) throw ContractError("widths must be positive");
    if (estimation_dropout < 0.0 || estimation_dropout >= 1.0) throw ContractError("dropout must lie in [0, 1)");
  }

  /// Applies one key; returns false when the key is not a training key.
  bool apply(const std::string& key, const std::string& v) {
    if (key == "lambda1") lambda1 = detail::to_double(key, v);
    else if (key == "lambda2") lambda2 = detail::to_double(key, v);
    else if (key == "lambda-kl") lambda_kl = detail::to_double(key, v);
    else if (key == "alpha") alpha = detail::to_double(key, v);
    else if (key == "k-components") k_components = detail::to_uint(key, v);
    else if (key == "d1") d1 = detail::to_uint(key, v);
    else if (key == "d2") d2 = detail::to_uint(key, v);
    else if (key == "hidden") hidden = detail::to_uint(key, v);
    else if (key == "estimation-hidden") estimation_hidden = detail::to_uint(key, v);
    else if (key == "estimation-dropout") estimation_dropout = detail::to_double(key, v);
    else if (key == "epochs") epochs = detail::to_uint(key, v);
    else if (key == "lr") lr = detail::to_double(key, v);
    else if (key == "seed") seed = detail::to_uint(key, v);
    else if (key == "ablation") ablation = parse_ablation(v);
    else if (key == "train-fraction") train_fraction = detail::to_double(key, v);
    else if (key == "mode") mode = parse_mode(v);
    else if (key == "weights-inside-activation") weights_inside_activation = detail::to_bool(key, v);
    else return false;
    return true;
  }

  KeyValues to_key_values() const {
    return {
        {"lambda1", detail::fmt(lambda1)},
        {"lambda2", detail::fmt(lambda2)},
        {"lambda-kl", detail::fmt(lambda_kl)},
        {"alpha", detail::fmt(alpha)},
        {"k-components", std::to_string(k_components)},
        {"d1", std::to_string(d1)},
        {"d2", std::to_string(d2)},
        {"hidden", std::to_string(hidden)},
        {"estimation-hidden", std::to_string(estimation_hidden)},
        {"estimation-dropout", detail::fmt(estimation_dropout)},
        {"epochs", std::to_string(epochs)},
        {"lr", detail::fmt(lr)},
        {"seed", std::to_string(seed)},
        {"ablation", to_string(ablation)},
        {"train-fraction", detail::fmt(train_fraction)},
        {"mode", to_string(mode)},
        {"weights-inside-activation", weights_inside_activation ? "true" : "false"},
    };
  }

  std::string to_config_string() const {
    std::ostringstream os;
    for (const auto& [k, v] : to_key_values()) os << k << '=' << v << '\n';
    return os.str();
  }

  static TrainConfig from_config_string(const std::string& text) {
    std::istringstream in(text);
    TrainConfig cfg;
    for (const auto& [k, v] : parse_key_values(in)) {
      if (!cfg.apply(k, v)) throw ParseError("unknown training key '" + k + "'");
    }
    return cfg;
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace specae
