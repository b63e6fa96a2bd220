#pragma once

// Out-of-distribution sweep for the toy problem: train the four objectives on
// data with spurious strength a_train, then measure test MSE over a grid of a.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ricelab/csv.hpp"
#include "ricelab/error.hpp"
#include "ricelab/objectives.hpp"
#include "ricelab/parallel.hpp"
#include "ricelab/rng.hpp"
#include "ricelab/scm_toy.hpp"

namespace ricelab {

using Logger = std::function<void(const std::string&)>;

inline constexpr std::array<std::string_view, 4> kToyMethods = {"erm", "avg",
                                                                "max", "rice"};

inline std::vector<double> default_a_grid() {
  std::vector<double> grid;
  for (int k = -6; k <= 6; ++k) grid.push_back(0.5 * k);
  return grid;
}

inline TrainConfig default_sweep_train() {
  TrainConfig t;
  t.lr = 1e-2;
  t.iterations = 5000;
  t.optimizer = Adam{};
  t.penalty_warmup = 2500;
  return t;
}

struct SweepConfig {
  std::size_t n_train = 1000;
  double a_train = -3.0;
  std::vector<double> a_grid = default_a_grid();
  std::size_t n_test = 10000;
  std::size_t reps = 200;
  /// Shared optimizer settings; the loss is replaced per method.
  TrainConfig train = default_sweep_train();
  double rice_lambda = 10.0;
  std::uint64_t seed = 0;
  /// Replications that diverge beyond this fraction fail the run.
  double max_divergent_fraction = 0.05;
};

inline void validate(const SweepConfig& cfg) {
  if (cfg.reps < 1) throw ConfigError("sweep: reps must be >= 1");
  if (cfg.a_grid.empty()) throw ConfigError("sweep: a_grid must be non-empty");
  if (cfg.n_train < 1 || cfg.n_test < 1) {
    throw ConfigError("sweep: sample sizes must be >= 1");
  }
  validate(cfg.train);
}

inline LossKind method_loss(std::string_view method, const SweepConfig& cfg) {
  return parse_loss(method, cfg.rice_lambda);
}

/// Test MSE of every method at every grid point for one replication.
struct RepResult {
  std::size_t rep = 0;
  std::array<bool, kToyMethods.size()> diverged{};
  /// mse[method][grid index]
  std::array<std::vector<double>, kToyMethods.size()> mse;
};

/// One replication: fresh training set, four trained models, and one test
/// set per grid point. All randomness derives from (cfg.seed, rep).
inline RepResult run_toy_rep(const SweepConfig& cfg, std::size_t rep) {
  RepResult out;
  out.rep = rep;
  const auto train_data =
      sample_dataset(cfg.n_train, cfg.a_train, derive_seed(cfg.seed, "train", rep));
  const ToyDesign design = make_design(train_data);
  std::array<ModelParams, kToyMethods.size()> models;
  for (std::size_t m = 0; m < kToyMethods.size(); ++m) {
    TrainConfig tc = cfg.train;
    tc.loss = method_loss(kToyMethods[m], cfg);
    tc.seed = derive_seed(cfg.seed, "init", rep);
    tc.log_every = 0;
    try {
      models[m] = train(tc, design);
    } catch (const DivergenceError&) {
      out.diverged[m] = true;
    }
  }
  for (auto& v : out.mse) v.assign(cfg.a_grid.size(), 0.0);
  const std::uint64_t test_seed = derive_seed(cfg.seed, "test", rep);
  for (std::size_t g = 0; g < cfg.a_grid.size(); ++g) {
    const auto test = sample_dataset(cfg.n_test, cfg.a_grid[g], test_seed);
    for (std::size_t m = 0; m < kToyMethods.size(); ++m) {
      if (!out.diverged[m]) out.mse[m][g] = test_mse(models[m], test);
    }
  }
  return out;
}

/// Replications [0, cfg.reps) in parallel; results are stored by rep index
/// so the output does not depend on scheduling.
inline std::vector<RepResult> run_toy_reps(const SweepConfig& cfg,
                                           std::size_t jobs = 0,
                                           const Logger& log = {}) {
  validate(cfg);
  std::vector<RepResult> results(cfg.reps);
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  parallel_for(cfg.reps, resolve_jobs(jobs), [&](std::size_t r) {
    results[r] = run_toy_rep(cfg, r);
    const std::size_t finished = ++done;
    if (log && (finished % 10 == 0 || finished == cfg.reps)) {
      std::lock_guard lock(log_mutex);
      log("toy-sweep: " + std::to_string(finished) + "/" +
          std::to_string(cfg.reps) + " replications done");
    }
  });
  return results;
}

struct ResultRow {
  std::string method;
  double a = 0.0;
  double mse_mean = 0.0;
  double mse_stderr = 0.0;
  std::size_t reps = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Mean and standard error per (method, a) over the first `use_reps`
/// replications (all when 0), excluding diverged ones. Fails when more than
/// cfg.max_divergent_fraction of a method's replications diverged.
inline std::vector<ResultRow> aggregate_sweep(const SweepConfig& cfg,
                                              std::span<const RepResult> reps,
                                              std::size_t use_reps = 0,
                                              const Logger& log = {}) {
  if (use_reps == 0 || use_reps > reps.size()) use_reps = reps.size();
  std::vector<ResultRow> rows;
  for (std::size_t m = 0; m < kToyMethods.size(); ++m) {
    std::size_t divergent = 0;
    for (std::size_t r = 0; r < use_reps; ++r) divergent += reps[r].diverged[m];
    if (divergent > 0 && log) {
      log("toy-sweep: method " + std::string(kToyMethods[m]) + " excluded " +
          std::to_string(divergent) + " divergent replication(s)");
    }
    if (static_cast<double>(divergent) >
        cfg.max_divergent_fraction * static_cast<double>(use_reps)) {
      throw DivergenceError(0, "toy-sweep: " + std::to_string(divergent) +
                                   " of " + std::to_string(use_reps) +
                                   " replications diverged for method " +
                                   std::string(kToyMethods[m]));
    }
    const std::size_t kept = use_reps - divergent;
    for (std::size_t g = 0; g < cfg.a_grid.size(); ++g) {
      double sum = 0.0;
      for (std::size_t r = 0; r < use_reps; ++r) {
        if (!reps[r].diverged[m]) sum += reps[r].mse[m][g];
      }
      const double mean = sum / static_cast<double>(kept);
      double ss = 0.0;
      for (std::size_t r = 0; r < use_reps; ++r) {
        if (!reps[r].diverged[m]) {
          ss += (reps[r].mse[m][g] - mean) * (reps[r].mse[m][g] - mean);
        }
      }
      const double stderr_ =
          kept > 1 ? std::sqrt(ss / static_cast<double>(kept - 1) /
                               static_cast<double>(kept))
                   : 0.0;
      rows.push_back({std::string(kToyMethods[m]), cfg.a_grid[g], mean,
                      stderr_, kept});
    }
  }
  return rows;
}

inline std::vector<ResultRow> run_toy_sweep(const SweepConfig& cfg,
                                            std::size_t jobs = 0,
                                            const Logger& log = {}) {
  const auto reps = run_toy_reps(cfg, jobs, log);
  return aggregate_sweep(cfg, reps, 0, log);
}

/// Rows of one method ordered as the grid.
inline std::vector<ResultRow> method_rows(std::span<const ResultRow> rows,
                                          std::string_view method) {
  std::vector<ResultRow> out;
  for (const auto& r : rows) {
    if (r.method == method) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result files

inline constexpr std::string_view kToyResultsHeader =
    "method,a,mse_mean,mse_stderr,reps";

inline std::string toy_results_to_csv(std::span<const ResultRow> rows) {
  std::string out(kToyResultsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.method + ',' + csv::format_double(r.a) + ',' +
           csv::format_double(r.mse_mean) + ',' +
           csv::format_double(r.mse_stderr) + ',' + std::to_string(r.reps) +
           '\n';
  }
  return out;
}

inline std::vector<ResultRow> toy_results_from_csv(const std::string& text) {
  const auto lines = csv::lines(text);
  if (lines.empty() || lines.front() != kToyResultsHeader) {
    throw ConfigError("toy results CSV: missing header");
  }
  std::vector<ResultRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i]);
    if (f.size() != 5) throw ConfigError("toy results CSV: bad row");
    rows.push_back({std::string(f[0]), csv::parse_double(f[1]),
                    csv::parse_double(f[2]), csv::parse_double(f[3]),
                    static_cast<std::size_t>(csv::parse_double(f[4]))});
  }
  return rows;
}

inline void write_results(std::span<const ResultRow> rows,
                          const std::filesystem::path& path) {
  csv::write_file(path, toy_results_to_csv(rows));
}

/// Plain-text run manifest. Config lines are `key = value` so the manifest
/// can be passed back through --config to repeat the run.
struct Manifest {
  std::string subcommand;
  std::string version;
  std::string wall_clock;
  std::map<std::string, std::string> config;
  std::vector<std::string> notes;
};

inline std::string manifest_to_text(const Manifest& m) {
  std::string out;
  out += "# subcommand: " + m.subcommand + '\n';
  out += "# version: " + m.version + '\n';
  out += "# wall_clock: " + m.wall_clock + '\n';
  out += "# seeds: derive_seed(seed, label, index) = mix64(mix64(seed ^ "
         "fnv1a64(label)) + (index + 1) * 0x9E3779B97F4A7C15)\n";
  for (const auto& note : m.notes) out += "# " + note + '\n';
  for (const auto& [k, v] : m.config) out += k + " = " + v + '\n';
  return out;
}

inline void write_manifest(const Manifest& m,
                           const std::filesystem::path& path) {
  csv::write_file(path, manifest_to_text(m));
}

}  // namespace ricelab
