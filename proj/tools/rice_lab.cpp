// rice_lab: command-line driver for the toy simulation, the spurious-color
// analog, and the finite oracle suite.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error, 3 oracle failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ricelab/ricelab.hpp"

#ifndef RICE_LAB_VERSION
#define RICE_LAB_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace ricelab;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitOracle = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::size_t jobs = 0;
};

ConfigMap load_config(const CommonArgs& args) {
  ConfigMap cfg = args.config_path.empty() ? ConfigMap{} : ConfigMap::load(args.config_path);
  for (const auto& s : args.overrides) cfg.set_override(s);
  if (args.seed) cfg.set("seed", std::to_string(*args.seed));
  return cfg;
}

fs::path prepare_out(const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw IoError("cannot create output directory '" + out.string() + "'" +
                  (ec ? ": " + ec.message() : ""));
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  explicit Run(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void write_manifest(const fs::path& path, const ConfigMap& cfg,
                      std::vector<std::string> notes = {}) const {
    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start_).count();
    char elapsed[64];
    std::snprintf(elapsed, sizeof elapsed, "%.3f s", secs);
    Manifest m;
    m.subcommand = subcommand_;
    m.version = RICE_LAB_VERSION;
    m.wall_clock = "started " + started_ + ", elapsed " + elapsed;
    m.config = cfg.echo();
    m.notes = std::move(notes);
    ricelab::write_manifest(m, path);
  }

 private:
  std::string subcommand_;
  std::string started_ = utc_now();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log_line(const std::string& line) { std::cerr << line << '\n'; }

int cmd_gen_data(const CommonArgs& args) {
  Run run("gen-data");
  ConfigMap cfg = load_config(args);
  const DataConfig d = build_data_config(cfg);
  cfg.require_all_used();
  const fs::path out = prepare_out(args.out_dir);
  const ToyDataset data = sample_dataset(d.n, d.a, d.seed);
  csv::write_file(out / "data.csv", dataset_to_csv(data));
  run.write_manifest(out / "data.manifest.txt", cfg);
  log_line("gen-data: wrote " + std::to_string(d.n) + " samples to " +
           (out / "data.csv").string());
  return 0;
}

int cmd_toy_train(const CommonArgs& args) {
  Run run("toy-train");
  ConfigMap cfg = load_config(args);
  const DataConfig d = build_data_config(cfg);
  TrainConfig defaults = default_sweep_train();
  defaults.log_every = 100;
  const TrainConfig t = build_train_config(cfg, defaults, true);
  cfg.require_all_used();
  const fs::path out = prepare_out(args.out_dir);
  const ToyDataset data = sample_dataset(d.n, d.a, derive_seed(d.seed, "train"));
  std::vector<ProgressRow> progress;
  TrainConfig tc = t;
  tc.seed = derive_seed(d.seed, "init");
  const ModelParams p = train(tc, data, &progress);
  csv::write_file(out / "params.csv", params_to_csv(p));
  csv::write_file(out / "train_log.csv", progress_to_csv(progress));
  run.write_manifest(out / "params.manifest.txt", cfg,
                     {"training data seed: derive_seed(seed, \"train\")",
                      "initialization seed: derive_seed(seed, \"init\")"});
  log_line("toy-train: " + loss_name(t.loss) + " final objective " +
           csv::format_double(progress.empty() ? 0.0 : progress.back().objective));
  return 0;
}

int cmd_toy_sweep(const CommonArgs& args) {
  Run run("toy-sweep");
  ConfigMap cfg = load_config(args);
  const SweepConfig s = build_sweep_config(cfg);
  cfg.require_all_used();
  const fs::path out = prepare_out(args.out_dir);
  const auto rows = run_toy_sweep(s, args.jobs, log_line);
  write_results(rows, out / "sweep.csv");
  run.write_manifest(out / "sweep.manifest.txt", cfg,
                     {"replication r: train derive_seed(seed, \"train\", r), init "
                      "derive_seed(seed, \"init\", r), test derive_seed(seed, \"test\", r)"});
  log_line("toy-sweep: wrote " + (out / "sweep.csv").string());
  return 0;
}

int cmd_spurious(const CommonArgs& args) {
  Run run("spurious");
  ConfigMap cfg = load_config(args);
  const SpuriousConfig s = build_spurious_config(cfg);
  cfg.require_all_used();
  const fs::path out = prepare_out(args.out_dir);
  const SpuriousResult r = run_spurious(s);
  write_results(r, out / "spurious.csv");
  run.write_manifest(out / "spurious.manifest.txt", cfg,
                     {"causal-only Bayes accuracy " + csv::format_double(r.bayes_rate)});
  log_line("spurious: erm " + csv::format_double(r.erm_accuracy) + ", rice " +
           csv::format_double(r.rice_accuracy) + ", bayes " +
           csv::format_double(r.bayes_rate));
  return 0;
}

int cmd_verify_oracle(const CommonArgs& args) {
  Run run("verify-oracle");
  ConfigMap cfg = load_config(args);
  const OracleSuiteConfig o = build_oracle_config(cfg);
  cfg.require_all_used();
  const fs::path out = prepare_out(args.out_dir);
  const auto checks = run_oracle_suite(o);
  for (const auto& c : checks) std::cout << format_check(c) << '\n';
  csv::write_file(out / "oracle.csv", oracle_to_csv(checks));
  run.write_manifest(out / "oracle.manifest.txt", cfg);
  return all_passed(checks) ? 0 : kExitOracle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariance-regularized training lab"};
  app.set_version_flag("--version", std::string(RICE_LAB_VERSION));
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&args](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "key = value config file");
    sub->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", args.seed, "master seed");
    sub->add_option("--set", args.overrides, "override, key=value (repeatable)")
        ->allow_extra_args(false);
  };

  struct Sub {
    CLI::App* app;
    int (*fn)(const CommonArgs&);
  };
  std::vector<Sub> subs = {
      {app.add_subcommand("gen-data", "sample the toy dataset"), cmd_gen_data},
      {app.add_subcommand("toy-train", "train one model on toy data"), cmd_toy_train},
      {app.add_subcommand("toy-sweep", "ERM/Avg/Max/RICE over the shift grid"), cmd_toy_sweep},
      {app.add_subcommand("spurious", "spurious-color classification analog"), cmd_spurious},
      {app.add_subcommand("verify-oracle", "finite-space oracle suite"), cmd_verify_oracle},
  };
  for (auto& s : subs) add_common(s.app);
  subs[2].app->add_option("--jobs", args.jobs,
                          "worker threads (default: RICE_LAB_JOBS, then all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (auto& s : subs) {
      if (s.app->parsed()) return s.fn(args);
    }
  } catch (const ConfigError& e) {
    std::cerr << "rice_lab: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "rice_lab: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
