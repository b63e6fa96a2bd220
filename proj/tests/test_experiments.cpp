#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>

#include "ricelab/experiments.hpp"

using namespace ricelab;

namespace {

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.n_train = 200;
  cfg.n_test = 500;
  cfg.reps = 4;
  cfg.a_grid = {-3.0, 0.0, 3.0};
  cfg.train.iterations = 300;
  cfg.train.penalty_warmup = 150;
  cfg.seed = 31;
  return cfg;
}

RepResult fake_rep(std::size_t r, double base, bool diverge_rice = false) {
  RepResult out;
  out.rep = r;
  for (std::size_t m = 0; m < kToyMethods.size(); ++m) out.mse[m] = {base + m, base + 2.0 * m};
  out.diverged[3] = diverge_rice;
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ricelab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(SweepConfigDefaults, ProtocolConstants) {
  const SweepConfig cfg;
  EXPECT_EQ(cfg.n_train, 1000u);
  EXPECT_EQ(cfg.a_train, -3.0);
  EXPECT_EQ(cfg.reps, 200u);
  EXPECT_EQ(cfg.n_test, 10000u);
  ASSERT_EQ(cfg.a_grid.size(), 13u);
  EXPECT_EQ(cfg.a_grid.front(), -3.0);
  EXPECT_EQ(cfg.a_grid.back(), 3.0);
  for (std::size_t g = 1; g < cfg.a_grid.size(); ++g) {
    EXPECT_DOUBLE_EQ(cfg.a_grid[g] - cfg.a_grid[g - 1], 0.5);
  }
}

TEST(SweepConfigValidation, Rejections) {
  SweepConfig cfg;
  cfg.reps = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.a_grid.clear();
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.train.lr = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(ToySweep, RowsCoverMethodsAndGrid) {
  const auto cfg = small_sweep();
  const auto rows = run_toy_sweep(cfg, 1);
  ASSERT_EQ(rows.size(), kToyMethods.size() * cfg.a_grid.size());
  for (auto method : kToyMethods) {
    const auto mr = method_rows(rows, method);
    ASSERT_EQ(mr.size(), cfg.a_grid.size());
    for (std::size_t g = 0; g < mr.size(); ++g) {
      EXPECT_EQ(mr[g].a, cfg.a_grid[g]);
      EXPECT_GE(mr[g].mse_mean, 0.0);
      EXPECT_GT(mr[g].mse_stderr, 0.0);
      EXPECT_EQ(mr[g].reps, cfg.reps);
    }
  }
}

TEST(ToySweep, DeterministicAndIndependentOfWorkers) {
  auto cfg = small_sweep();
  cfg.reps = 1;
  EXPECT_EQ(run_toy_sweep(cfg, 1), run_toy_sweep(cfg, 1));
  cfg.reps = 3;
  EXPECT_EQ(run_toy_sweep(cfg, 1), run_toy_sweep(cfg, 3));
}

TEST(ToySweep, PrefixOfRepsMatchesSmallerRun) {
  auto cfg = small_sweep();
  const auto all = run_toy_reps(cfg, 2);
  auto fewer = cfg;
  fewer.reps = 2;
  EXPECT_EQ(aggregate_sweep(cfg, all, 2), run_toy_sweep(fewer, 1));
}

TEST(ToySweep, RepDependsOnlyOnSeedAndIndex) {
  auto cfg = small_sweep();
  const auto a = run_toy_rep(cfg, 2);
  cfg.reps = 50;
  const auto b = run_toy_rep(cfg, 2);
  EXPECT_EQ(a.mse, b.mse);
  cfg.seed = 32;
  EXPECT_NE(run_toy_rep(cfg, 2).mse, a.mse);
}

TEST(Aggregate, MeanAndStandardError) {
  SweepConfig cfg;
  cfg.a_grid = {0.0, 1.0};
  const std::vector<RepResult> reps{fake_rep(0, 1.0), fake_rep(1, 2.0), fake_rep(2, 4.0)};
  const auto rows = aggregate_sweep(cfg, reps);
  // ERM at a = 0 sees 1, 2, 4: mean 7/3, sample variance 7/3.
  EXPECT_DOUBLE_EQ(rows[0].mse_mean, 7.0 / 3.0);
  EXPECT_NEAR(rows[0].mse_stderr, std::sqrt(7.0 / 3.0 / 3.0), 1e-15);
  EXPECT_EQ(rows[0].reps, 3u);
}

TEST(Aggregate, ExcludesRareDivergenceWithLog) {
  SweepConfig cfg;
  cfg.a_grid = {0.0, 1.0};
  std::vector<RepResult> reps;
  for (std::size_t r = 0; r < 40; ++r) reps.push_back(fake_rep(r, 1.0, r == 7));
  std::vector<std::string> lines;
  const auto rows = aggregate_sweep(cfg, reps, 0, [&](const std::string& s) { lines.push_back(s); });
  const auto rice = method_rows(rows, "rice");
  EXPECT_EQ(rice[0].reps, 39u);
  EXPECT_DOUBLE_EQ(rice[0].mse_mean, 4.0);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_NE(lines[0].find("rice"), std::string::npos);
}

TEST(Aggregate, FrequentDivergenceFails) {
  SweepConfig cfg;
  cfg.a_grid = {0.0, 1.0};
  std::vector<RepResult> reps;
  for (std::size_t r = 0; r < 20; ++r) reps.push_back(fake_rep(r, 1.0, r < 2));
  EXPECT_THROW(aggregate_sweep(cfg, reps), DivergenceError);
}

TEST(Aggregate, DivergentTrainingIsRecorded) {
  auto cfg = small_sweep();
  cfg.train.optimizer = Sgd{};
  cfg.train.lr = 1e3;
  cfg.reps = 1;
  const auto rep = run_toy_rep(cfg, 0);
  for (bool d : rep.diverged) EXPECT_TRUE(d);
  EXPECT_THROW(run_toy_sweep(cfg, 1), DivergenceError);
}

TEST(ResultsCsv, EmptyAndOneRow) {
  EXPECT_EQ(toy_results_to_csv({}), "method,a,mse_mean,mse_stderr,reps\n");
  const std::vector<ResultRow> one{{"rice", -3.0, 1.25, 0.5, 200}};
  EXPECT_EQ(toy_results_to_csv(one), "method,a,mse_mean,mse_stderr,reps\nrice,-3,1.25,0.5,200\n");
}

TEST(ResultsCsv, RoundTripThroughFile) {
  const auto rows = run_toy_sweep(small_sweep(), 1);
  const auto dir = temp_dir("results");
  write_results(rows, dir / "sweep.csv");
  EXPECT_EQ(toy_results_from_csv(csv::read_file(dir / "sweep.csv")), rows);
}

TEST(ResultsCsv, UnwritablePathNamesPath) {
  const std::vector<ResultRow> rows;
  try {
    write_results(rows, "/nonexistent-dir/sub/sweep.csv");
    FAIL() << "expected an I/O error";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/sub/sweep.csv"), std::string::npos);
  }
}

TEST(Manifest, ConfigLinesAndNotes) {
  Manifest m;
  m.subcommand = "toy-sweep";
  m.version = "1.0";
  m.wall_clock = "1 s";
  m.config = {{"seed", "7"}, {"sweep.reps", "200"}};
  m.notes = {"hello"};
  const std::string text = manifest_to_text(m);
  EXPECT_NE(text.find("# subcommand: toy-sweep\n"), std::string::npos);
  EXPECT_NE(text.find("# hello\n"), std::string::npos);
  EXPECT_NE(text.find("seed = 7\n"), std::string::npos);
  EXPECT_NE(text.find("sweep.reps = 200\n"), std::string::npos);
}

TEST(Parallel, ResolveJobs) {
  EXPECT_EQ(resolve_jobs(3), 3u);
  ::setenv("RICE_LAB_JOBS", "5", 1);
  EXPECT_EQ(resolve_jobs(0), 5u);
  ::setenv("RICE_LAB_JOBS", "junk", 1);
  EXPECT_GE(resolve_jobs(0), 1u);
  ::unsetenv("RICE_LAB_JOBS");
  EXPECT_GE(resolve_jobs(0), 1u);
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 4) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
