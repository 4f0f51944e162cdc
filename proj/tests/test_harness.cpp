#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "rgpdkf/harness/config.hpp"
#include "rgpdkf/harness/io.hpp"
#include "rgpdkf/harness/run.hpp"

using namespace rgpdkf;
using namespace rgpdkf::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rgpdkf_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

HarnessConfig small_config() {
  return parse_config(json::parse(R"({
    "kernel": {"length_scale": 1.0, "signal_std": 20.0},
    "scenario": {"duration": 3.0},
    "harness": {"scenarios": ["S2"], "estimators": ["rgp-dkf"], "seeds": {"first": 3, "count": 1}, "warmup": 0.5,
                "threads": 1}
  })"));
}

} // namespace

TEST(ParseConfig, DefaultsFromEmptyDocument) {
  const auto cfg = parse_config(json::object());
  EXPECT_EQ(cfg.estimator.kernel.length_scale(), 1.0);
  EXPECT_EQ(cfg.estimator.kernel.signal_std(), 1.0);
  EXPECT_DOUBLE_EQ(cfg.estimator.residual_std, 0.05);
  EXPECT_EQ(cfg.seeds.count, 20u);
  EXPECT_FALSE(cfg.baseline_measurement_std.has_value());
  EXPECT_EQ(cfg.scenarios.size(), 3u);
}

TEST(ParseConfig, ResidualStdFollowsSignalStdUnlessGiven) {
  auto cfg = parse_config(json::parse(R"({"kernel": {"signal_std": 20.0}})"));
  EXPECT_DOUBLE_EQ(cfg.estimator.residual_std, 1.0);
  cfg = parse_config(json::parse(R"({"kernel": {"signal_std": 20.0}, "ekf": {"residual_std": 0.3}})"));
  EXPECT_DOUBLE_EQ(cfg.estimator.residual_std, 0.3);
}

TEST(ParseConfig, RejectsUnknownKeysAtEveryLevel) {
  EXPECT_THROW(parse_config(json::parse(R"({"kernal": {}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"kernel": {"length_scale": 1.0, "sigmaK": 2.0}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"harness": {"seeds": {"first": 0, "last": 3}}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"grid": {"axes": [{"points": 5, "lower": 0, "upper": 1, "x": 0}]}})")),
               ConfigError);
}

TEST(ParseConfig, RejectsInvalidValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"kernel": {"length_scale": -1.0}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"kernel": {"length_scale": "one"}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"scenario": {"sample_time": 0.0}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"harness": {"scenarios": ["S9"]}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(
                   R"({"grid": {"axes": [{"points": 5, "lower": 0, "upper": 1}, {"points": 5, "lower": 0, "upper": 1}]}})")),
               ConfigError);
}

TEST(ParseConfig, MaterializedConfigRoundTrips) {
  const auto cfg = small_config();
  const json once = to_json(cfg);
  const json twice = to_json(parse_config(once));
  EXPECT_EQ(once, twice);
}

TEST(LoadConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(TuningCandidates, LogGridInSignalStdUnits) {
  auto cfg = parse_config(json::parse(R"({"kernel": {"signal_std": 2.0}})"));
  const auto c = tuning_candidates(cfg);
  ASSERT_EQ(c.size(), 13u);
  EXPECT_NEAR(c.front(), 2e-3, 1e-15);
  EXPECT_NEAR(c.back(), 20.0, 1e-12);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_NEAR(c[i] / c[i - 1], std::pow(10.0, 4.0 / 12.0), 1e-12);
}

TEST(CellName, Format) {
  EXPECT_EQ(cell_name(sim::Scenario::S1, sim::Estimator::RgpDkf, 3), "S1_rgp-dkf_seed0003");
  EXPECT_EQ(cell_name(sim::Scenario::S3, sim::Estimator::PurePrediction, 12345), "S3_pure-prediction_seed12345");
}

TEST(RunCsv, RoundTripPreservesValuesAndNan) {
  sim::ScenarioConfig sc;
  sc.id = sim::Scenario::S3;
  sc.duration = 0.5;
  const auto rec = sim::run_scenario(sc, sim::Estimator::RgpDkf, sim::benchmark_estimator_config());
  std::stringstream buf;
  write_run_csv(rec, buf);
  const auto back = read_run_csv(buf);
  ASSERT_EQ(back.size(), rec.size());
  EXPECT_EQ(back.gp_mean, rec.gp_mean);
  EXPECT_EQ(back.x_est, rec.x_est);
  EXPECT_EQ(back.z_true, rec.z_true);
  EXPECT_EQ(back.train, rec.train);
  EXPECT_TRUE(std::isnan(back.y[0](1)));
  EXPECT_TRUE(std::isnan(back.y_gp[0]));
}

TEST(RunCsv, RejectsMalformedInput) {
  std::stringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_run_csv(bad_header), std::runtime_error);
  std::stringstream short_row(std::string(kRunCsvHeader) + "\n0,1,2\n");
  EXPECT_THROW(read_run_csv(short_row), std::runtime_error);
}

TEST(Run, DryRunWritesNothing) {
  const fs::path dir = fresh_dir("dry");
  const auto report = run(small_config(), {dir, true});
  EXPECT_TRUE(report.cells.empty());
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Run, OneCellProducesOneCsvAndRecomputableMetrics) {
  const fs::path dir = fresh_dir("cell");
  auto cfg = small_config();
  cfg.estimator.snapshot_times = {1.0};
  const auto report = run(cfg, {dir, false});
  ASSERT_EQ(report.cells.size(), 1u);
  ASSERT_EQ(report.cells[0].status, "ok") << report.cells[0].error;
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  std::size_t csvs = 0;
  for (const auto& entry : fs::directory_iterator(dir / "runs")) csvs += entry.path().extension() == ".csv";
  EXPECT_EQ(csvs, 1u);
  EXPECT_TRUE(fs::exists(dir / "runs" / "S2_rgp-dkf_seed0003.csv"));
  EXPECT_FALSE(fs::is_empty(dir / "plots"));

  const auto recomputed = recompute_from_csv(report, dir, cfg.warmup);
  EXPECT_EQ(recomputed[0].metrics.rmse, report.cells[0].metrics.rmse);
  EXPECT_EQ(recomputed[0].metrics.nll, report.cells[0].metrics.nll);

  std::ifstream in(dir / "report.json");
  const json j = json::parse(in);
  EXPECT_EQ(j["cells"][0]["rmse"].get<double>(), report.cells[0].metrics.rmse);
  fs::remove_all(dir);
}

TEST(Run, BaselineInS3IsNotApplicable) {
  auto cfg = small_config();
  cfg.scenarios = {sim::Scenario::S3};
  cfg.estimators = {sim::Estimator::RgpB};
  cfg.baseline_measurement_std = 20.0;
  const auto report = run(cfg);
  ASSERT_EQ(report.cells.size(), 1u);
  EXPECT_EQ(report.cells[0].status, "not-applicable");
  EXPECT_TRUE(report.summary.empty());
}

TEST(Run, ResultsIndependentOfThreadCount) {
  auto cfg = small_config();
  cfg.seeds = {0, 4};
  cfg.threads = 1;
  const auto serial = run(cfg);
  cfg.threads = 4;
  const auto parallel = run(cfg);
  ASSERT_EQ(serial.cells.size(), parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    EXPECT_EQ(serial.cells[i].metrics.rmse, parallel.cells[i].metrics.rmse);
    EXPECT_EQ(serial.cells[i].metrics.nll, parallel.cells[i].metrics.nll);
  }
}

TEST(Reference, OrderOfMagnitude) {
  EXPECT_TRUE(within_order_of_magnitude(0.5, 0.1));
  EXPECT_TRUE(within_order_of_magnitude(1.0, 0.1));
  EXPECT_FALSE(within_order_of_magnitude(1.01, 0.1));
  EXPECT_FALSE(within_order_of_magnitude(-1.0, 1.0));
  EXPECT_FALSE(within_order_of_magnitude(0.0, 1.0));
}

TEST(Reference, ComparisonFlagsOrdering) {
  Report r;
  auto add = [&](sim::Scenario s, double rmse_v) {
    SummaryRow row;
    row.scenario = s;
    row.estimator = sim::Estimator::RgpDkf;
    row.n = 1;
    row.rmse_mean = rmse_v;
    row.nll_mean = 1.2;
    r.summary.push_back(row);
  };
  add(sim::Scenario::S1, 0.4);
  add(sim::Scenario::S2, 0.1);
  add(sim::Scenario::S3, 0.3);
  auto v = check_against_reference(r);
  EXPECT_TRUE(v.magnitude_ok);
  EXPECT_TRUE(v.ordering_ok);
  r.summary[2].rmse_mean = 0.5;
  v = check_against_reference(r);
  EXPECT_FALSE(v.ordering_ok);
  EXPECT_NE(format_comparison(r).find("S2 <= S3 <= S1: no"), std::string::npos);
}
