// Command-line front end for the benchmark harness.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rgpdkf/harness/config.hpp"
#include "rgpdkf/harness/io.hpp"
#include "rgpdkf/harness/run.hpp"

namespace fs = std::filesystem;
using namespace rgpdkf;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out = "out";
  bool paper_compare = false;
  bool dry_run = false;
};

harness::SeedRange parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--seeds", "expected N..M");
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  const std::string a = text.substr(0, dots);
  const std::string b = text.substr(dots + 2);
  if (std::from_chars(a.data(), a.data() + a.size(), lo).ec != std::errc{} ||
      std::from_chars(b.data(), b.data() + b.size(), hi).ec != std::errc{} || hi < lo) {
    throw CLI::ValidationError("--seeds", "expected N..M with N <= M");
  }
  return {lo, hi - lo + 1};
}

harness::HarnessConfig load(const CommonFlags& flags) {
  harness::HarnessConfig cfg = flags.config_path.empty() ? harness::parse_config(nlohmann::json::object())
                                                          : harness::load_config(flags.config_path);
  if (!flags.seeds.empty()) cfg.seeds = parse_seed_range(flags.seeds);
  if (flags.seed) cfg.seeds = {*flags.seed, 1};
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Harness config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Single seed");
  cmd->add_option("--seeds", flags.seeds, "Inclusive seed range N..M");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_flag("--dry-run", flags.dry_run, "Validate the configuration and exit");
}

int print_report(const harness::Report& report, bool compare) {
  std::cout << "scenario  estimator        n   RMSE mean (std)     NLL mean (std)\n";
  for (const auto& row : report.summary) {
    std::printf("%-9s %-15s %3zu  %7.4f (%6.4f)   %7.4f (%6.4f)\n", std::string(sim::to_string(row.scenario)).c_str(),
                std::string(sim::to_string(row.estimator)).c_str(), row.n, row.rmse_mean, row.rmse_std,
                row.nll_mean, row.nll_std);
  }
  int failures = 0;
  for (const auto& c : report.cells) {
    if (c.status == "error") {
      ++failures;
      std::cerr << "cell " << harness::cell_name(c.scenario, c.estimator, c.seed) << " failed: " << c.error << '\n';
    }
  }
  if (compare) std::cout << '\n' << harness::format_comparison(report);
  return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive GP regression fused into an EKF: benchmark harness"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* run_cmd = app.add_subcommand("run", "Run the full scenario x estimator x seed matrix");
  add_common(run_cmd, flags);
  run_cmd->add_flag("--paper-compare", flags.paper_compare, "Print measured metrics next to the reference table");

  std::string scenario_name = "S2";
  std::string estimator_name = "rgp-dkf";
  auto* scenario_cmd = app.add_subcommand("scenario", "Run a single (scenario, estimator, seed) cell");
  add_common(scenario_cmd, flags);
  scenario_cmd->add_option("--scenario", scenario_name, "S1, S2 or S3");
  scenario_cmd->add_option("--estimator", estimator_name, "rgp-dkf, rgp-b or pure-prediction");

  auto* sweep_cmd = app.add_subcommand("sweep-sigma-ygp", "Tune the baseline measurement std per scenario");
  add_common(sweep_cmd, flags);

  std::vector<double> snapshot_times{0.5, 100.0};
  std::size_t resolution = 0;
  auto* snap_cmd = app.add_subcommand("snapshot", "Export GP sweeps (mean and 2-sigma band) at given times");
  add_common(snap_cmd, flags);
  snap_cmd->add_option("--scenario", scenario_name, "S1, S2 or S3");
  snap_cmd->add_option("--estimator", estimator_name, "rgp-dkf, rgp-b or pure-prediction");
  snap_cmd->add_option("--times", snapshot_times, "Snapshot times in seconds")->delimiter(',');
  snap_cmd->add_option("--resolution", resolution, "Sweep points (default from config)");

  auto* validate_cmd = app.add_subcommand("validate", "Check a config and print it with all defaults filled in");
  add_common(validate_cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    harness::HarnessConfig cfg = load(flags);

    if (validate_cmd->parsed()) {
      std::cout << harness::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    if (flags.dry_run) {
      std::cout << "configuration ok\n";
      return 0;
    }

    if (run_cmd->parsed()) {
      const auto report = harness::run(cfg, {fs::path(flags.out), false});
      std::cout << "wrote " << (fs::path(flags.out) / "report.json").string() << '\n';
      return print_report(report, flags.paper_compare);
    }

    if (scenario_cmd->parsed()) {
      cfg.scenarios = {sim::parse_scenario(scenario_name)};
      cfg.estimators = {sim::parse_estimator(estimator_name)};
      if (!flags.seed && flags.seeds.empty()) cfg.seeds = {cfg.seeds.first, 1};
      const auto report = harness::run(cfg, {fs::path(flags.out), false});
      return print_report(report, false);
    }

    if (sweep_cmd->parsed()) {
      fs::create_directories(flags.out);
      nlohmann::json out = nlohmann::json::array();
      for (auto s : cfg.scenarios) {
        if (s == sim::Scenario::S3) continue;
        const auto res = harness::tune_baseline(cfg, s);
        std::cout << sim::to_string(s) << ": best measurement std " << res.best << '\n';
        for (std::size_t i = 0; i < res.candidates.size(); ++i) {
          std::printf("  %12.5g  rmse %.5f\n", res.candidates[i], res.rmse[i]);
        }
        out.push_back({{"scenario", sim::to_string(s)},
                       {"candidates", res.candidates},
                       {"rmse", res.rmse},
                       {"best", res.best}});
      }
      std::ofstream(fs::path(flags.out) / "baseline_tuning.json") << out.dump(2) << '\n';
      return 0;
    }

    if (snap_cmd->parsed()) {
      const auto id = sim::parse_scenario(scenario_name);
      const auto est = sim::parse_estimator(estimator_name);
      cfg.estimator.snapshot_times = snapshot_times;
      if (resolution >= 2) cfg.snapshot_resolution = resolution;
      std::optional<double> baseline_std = cfg.baseline_measurement_std;
      if (est == sim::Estimator::RgpB && !baseline_std) baseline_std = harness::tune_baseline(cfg, id).best;
      const auto rec = harness::run_cell(cfg, id, est, cfg.seeds.first, baseline_std);
      const fs::path dir = fs::path(flags.out) / "plots";
      harness::write_snapshots(cfg, rec, dir, harness::cell_name(id, est, cfg.seeds.first));
      std::cout << "wrote " << rec.snapshots.size() << " sweep table(s) to " << dir.string() << '\n';
      return 0;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
