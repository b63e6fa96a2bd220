#pragma once

// Flat `key = value` configuration. Lines starting with '#' are comments;
// sections are dotted prefixes (train.lr, sweep.reps, ...). Every key read by
// a builder is recorded with its effective value, so the echo written into a
// manifest reproduces the run when passed back through --config.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/experiments.hpp"
#include "ricelab/objectives.hpp"
#include "ricelab/oracle_suite.hpp"
#include "ricelab/spurious.hpp"

namespace ricelab {

class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text, std::string_view origin = "config") {
    ConfigMap cfg;
    std::size_t line_no = 0;
    for (const auto& raw : csv::lines(std::string(text))) {
      ++line_no;
      const std::string_view line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
      }
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ConfigMap load(const std::filesystem::path& path) {
    return parse(csv::read_file(path), path.string());
  }

  /// Applies `key=value`.
  void set_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void set(std::string_view key, std::string_view value) {
    if (key.empty()) throw ConfigError("empty config key");
    values_[std::string(key)] = std::string(value);
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const std::string v = lookup(key).value_or(fallback);
    echo_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double fallback) {
    const auto raw = lookup(key);
    const double v = raw ? parse_double(key, *raw) : fallback;
    echo_[key] = csv::format_double(v);
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto raw = lookup(key);
    const std::uint64_t v = raw ? parse_u64(key, *raw) : fallback;
    echo_[key] = std::to_string(v);
    return v;
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) {
    const auto raw = lookup(key);
    bool v = fallback;
    if (raw) {
      if (*raw == "true" || *raw == "1") {
        v = true;
      } else if (*raw == "false" || *raw == "0") {
        v = false;
      } else {
        throw ConfigError(key + ": expected true or false, got '" + *raw + "'");
      }
    }
    echo_[key] = v ? "true" : "false";
    return v;
  }

  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) {
    const auto raw = lookup(key);
    std::vector<double> v = fallback;
    if (raw) {
      v.clear();
      for (auto field : csv::split(*raw)) v.push_back(parse_double(key, std::string(field)));
    }
    std::string text;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) text += ", ";
      text += csv::format_double(v[i]);
    }
    echo_[key] = text;
    return v;
  }

  /// Fails on any supplied key that no builder consumed.
  void require_all_used() const {
    std::string unused;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) unused += (unused.empty() ? "" : ", ") + k;
    }
    if (!unused.empty()) throw ConfigError("unrecognized config keys: " + unused);
  }

  /// Effective value of every key read so far.
  const std::map<std::string, std::string>& echo() const { return echo_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  }

  std::optional<std::string> lookup(const std::string& key) {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  static double parse_double(const std::string& key, const std::string& raw) {
    try {
      return csv::parse_double(raw);
    } catch (const ConfigError&) {
      throw ConfigError(key + ": not a number: '" + raw + "'");
    }
  }

  static std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
      throw ConfigError(key + ": not an unsigned integer: '" + raw + "'");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
  std::map<std::string, std::string> echo_;
};

// ---------------------------------------------------------------------------
// Builders

struct DataConfig {
  std::size_t n = 1000;
  double a = -3.0;
  std::uint64_t seed = 0;
};

inline DataConfig build_data_config(ConfigMap& cfg) {
  DataConfig d;
  d.seed = cfg.get_u64("seed", d.seed);
  d.n = cfg.get_size("data.n", d.n);
  d.a = cfg.get_double("data.a", d.a);
  if (d.n == 0) throw ConfigError("data.n must be >= 1");
  return d;
}

/// Optimizer settings shared by toy-train and toy-sweep. The loss is read
/// only when `with_loss` is set, since the sweep trains every method.
inline TrainConfig build_train_config(ConfigMap& cfg, const TrainConfig& defaults,
                                      bool with_loss) {
  TrainConfig t = defaults;
  t.seed = cfg.get_u64("seed", t.seed);
  if (with_loss) {
    const std::string loss = cfg.get_string("train.loss", "erm");
    const double lambda = cfg.get_double("train.lambda", 10.0);
    t.loss = parse_loss(loss, lambda);
  }
  t.lr = cfg.get_double("train.lr", t.lr);
  t.iterations = cfg.get_size("train.iterations", t.iterations);
  t.batch_size = cfg.get_size("train.batch_size", t.batch_size);
  const std::string opt = cfg.get_string(
      "train.optimizer", std::holds_alternative<Sgd>(t.optimizer) ? "sgd" : "adam");
  if (opt == "sgd") {
    t.optimizer = Sgd{};
  } else if (opt == "adam") {
    Adam a;
    a.b1 = cfg.get_double("train.adam_b1", a.b1);
    a.b2 = cfg.get_double("train.adam_b2", a.b2);
    a.eps = cfg.get_double("train.adam_eps", a.eps);
    t.optimizer = a;
  } else {
    throw ConfigError("train.optimizer: expected adam or sgd, got '" + opt + "'");
  }
  t.smoothing_coef = cfg.get_double("train.smoothing", t.smoothing_coef);
  t.log_every = cfg.get_size("train.log_every", t.log_every);
  t.penalty_warmup = cfg.get_size("train.penalty_warmup", t.penalty_warmup);
  validate(t);
  return t;
}

inline SweepConfig build_sweep_config(ConfigMap& cfg) {
  SweepConfig s;
  s.seed = cfg.get_u64("seed", s.seed);
  s.n_train = cfg.get_size("sweep.n_train", s.n_train);
  s.a_train = cfg.get_double("sweep.a_train", s.a_train);
  s.a_grid = cfg.get_doubles("sweep.a_grid", s.a_grid);
  s.n_test = cfg.get_size("sweep.n_test", s.n_test);
  s.reps = cfg.get_size("sweep.reps", s.reps);
  s.rice_lambda = cfg.get_double("sweep.rice_lambda", s.rice_lambda);
  s.max_divergent_fraction =
      cfg.get_double("sweep.max_divergent_fraction", s.max_divergent_fraction);
  s.train = build_train_config(cfg, s.train, false);
  validate(s);
  return s;
}

inline SpuriousConfig build_spurious_config(ConfigMap& cfg) {
  SpuriousConfig s;
  s.seed = cfg.get_u64("seed", s.seed);
  s.n_causal_bits = cfg.get_size("spurious.n_causal_bits", s.n_causal_bits);
  s.n_colors = cfg.get_size("spurious.n_colors", s.n_colors);
  s.causal_flip_prob = cfg.get_double("spurious.flip_prob", s.causal_flip_prob);
  s.min_codeword_distance =
      cfg.get_size("spurious.min_codeword_distance", s.min_codeword_distance);
  s.n_train = cfg.get_size("spurious.n_train", s.n_train);
  s.n_test = cfg.get_size("spurious.n_test", s.n_test);
  s.lambda0 = cfg.get_double("spurious.lambda0", s.lambda0);
  s.lr = cfg.get_double("spurious.lr", s.lr);
  s.iterations = cfg.get_size("spurious.iterations", s.iterations);
  validate(s);
  return s;
}

inline OracleSuiteConfig build_oracle_config(ConfigMap& cfg) {
  OracleSuiteConfig o;
  o.seed = cfg.get_u64("seed", o.seed);
  o.cit_samples = cfg.get_size("oracle.cit_samples", o.cit_samples);
  o.lemma2_instances = cfg.get_size("oracle.lemma2_instances", o.lemma2_instances);
  o.theorem3_instances = cfg.get_size("oracle.theorem3_instances", o.theorem3_instances);
  o.theorem2_instances = cfg.get_size("oracle.theorem2_instances", o.theorem2_instances);
  o.theorem1_instances = cfg.get_size("oracle.theorem1_instances", o.theorem1_instances);
  o.inject_failure = cfg.get_bool("oracle.inject_failure", o.inject_failure);
  return o;
}

}  // namespace ricelab
