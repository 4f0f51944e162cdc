#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgpdkf/kernel.hpp"
#include "rgpdkf/sim.hpp"

namespace rgpdkf::harness {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t count = 20;
};

/// Baseline measurement std search: log-spaced factors times sigma_K.
struct TuningGrid {
  double min_factor = 1e-3;
  double max_factor = 10.0;
  std::size_t points = 13;
  std::uint64_t seed = 1000003;
};

struct HarnessConfig {
  sim::EstimatorConfig estimator;
  sim::ScenarioConfig scenario; // id and seed are filled per cell
  std::optional<double> baseline_measurement_std; // unset: tune per scenario
  TuningGrid tuning;

  std::vector<sim::Scenario> scenarios{sim::Scenario::S1, sim::Scenario::S2, sim::Scenario::S3};
  std::vector<sim::Estimator> estimators{sim::Estimator::RgpDkf, sim::Estimator::RgpB};
  SeedRange seeds;
  double warmup = 1.0;
  std::size_t snapshot_resolution = 201;
  unsigned threads = 0; // 0: hardware concurrency
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline Eigen::Vector2d read_vec2(const json& obj, const char* key, const Eigen::Vector2d& fallback,
                                 const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto v = obj.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError(where + "." + key + ": expected 2 entries");
  return {v[0], v[1]};
}

} // namespace detail

inline bool config_values_valid(const HarnessConfig& cfg) {
  const auto& s = cfg.scenario;
  const auto& e = cfg.estimator;
  return s.sample_time > 0.0 && s.duration > 0.0 && s.low_noise_std > 0.0 && s.high_noise_std > 0.0 &&
         s.zeta_std >= 0.0 && s.zeta_cutoff > 0.0 && e.residual_std >= 0.0 && e.gp_process_std >= 0.0 &&
         (e.process_var.array() >= 0.0).all() && (e.initial_state_var.array() >= 0.0).all() &&
         (!e.cov_bound || *e.cov_bound >= e.kernel.signal_variance()) &&
         (!cfg.baseline_measurement_std || *cfg.baseline_measurement_std > 0.0) && cfg.tuning.min_factor > 0.0 &&
         cfg.tuning.max_factor >= cfg.tuning.min_factor && cfg.tuning.points >= 1 && cfg.warmup >= 0.0 &&
         cfg.warmup < s.duration && cfg.snapshot_resolution >= 2 && cfg.seeds.count >= 1 && !cfg.scenarios.empty() &&
         !cfg.estimators.empty();
}

/// Parses and validates a config document. Missing keys take defaults,
/// unknown keys are errors.
inline HarnessConfig parse_config(const json& doc) {
  using detail::read;
  using detail::reject_unknown;
  HarnessConfig cfg;
  reject_unknown(doc, {"kernel", "grid", "rgp", "ekf", "baseline", "scenario", "harness"}, "config");

  try {
    if (doc.contains("kernel")) {
      const auto& k = doc["kernel"];
      reject_unknown(k, {"length_scale", "signal_std"}, "kernel");
      double l = cfg.estimator.kernel.length_scale();
      double s = cfg.estimator.kernel.signal_std();
      read(k, "length_scale", l, "kernel");
      read(k, "signal_std", s, "kernel");
      cfg.estimator.kernel = KernelSpec(l, s);
    }
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      reject_unknown(g, {"axes"}, "grid");
      std::vector<GridAxis> axes;
      for (const auto& a : g.at("axes")) {
        reject_unknown(a, {"points", "lower", "upper"}, "grid.axes[]");
        axes.push_back({a.at("points").get<std::size_t>(), a.at("lower").get<double>(), a.at("upper").get<double>()});
      }
      cfg.estimator.grid = GridSpec(std::move(axes));
      if (cfg.estimator.grid.input_dim() != 1) {
        throw ConfigError("grid: the benchmark disturbance has a scalar input; exactly one axis is required");
      }
    }
    // sigma_r defaults to 0.05 sigma_K unless given explicitly
    cfg.estimator.residual_std = 0.05 * cfg.estimator.kernel.signal_std();
    if (doc.contains("rgp")) {
      const auto& r = doc["rgp"];
      reject_unknown(r, {"process_std", "cov_bound"}, "rgp");
      read(r, "process_std", cfg.estimator.gp_process_std, "rgp");
      if (r.contains("cov_bound") && !r["cov_bound"].is_null()) cfg.estimator.cov_bound = r["cov_bound"].get<double>();
    }
    if (doc.contains("ekf")) {
      const auto& e = doc["ekf"];
      reject_unknown(e, {"process_var", "initial_state_var", "residual_std"}, "ekf");
      cfg.estimator.process_var = detail::read_vec2(e, "process_var", cfg.estimator.process_var, "ekf");
      cfg.estimator.initial_state_var =
          detail::read_vec2(e, "initial_state_var", cfg.estimator.initial_state_var, "ekf");
      if (e.contains("residual_std") && !e["residual_std"].is_null()) {
        cfg.estimator.residual_std = e["residual_std"].get<double>();
      }
    }
    if (doc.contains("baseline")) {
      const auto& b = doc["baseline"];
      reject_unknown(b, {"measurement_std", "tuning"}, "baseline");
      if (b.contains("measurement_std") && !b["measurement_std"].is_null()) {
        cfg.baseline_measurement_std = b["measurement_std"].get<double>();
      }
      if (b.contains("tuning")) {
        const auto& t = b["tuning"];
        reject_unknown(t, {"min_factor", "max_factor", "points", "seed"}, "baseline.tuning");
        read(t, "min_factor", cfg.tuning.min_factor, "baseline.tuning");
        read(t, "max_factor", cfg.tuning.max_factor, "baseline.tuning");
        read(t, "points", cfg.tuning.points, "baseline.tuning");
        read(t, "seed", cfg.tuning.seed, "baseline.tuning");
      }
    }
    auto& sc = cfg.scenario;
    bool explicit_schedule = false;
    if (doc.contains("scenario")) {
      const auto& s = doc["scenario"];
      reject_unknown(s,
                     {"sample_time", "duration", "low_noise_std", "high_noise_std", "zeta_std", "zeta_cutoff",
                      "schedule", "train_until"},
                     "scenario");
      read(s, "sample_time", sc.sample_time, "scenario");
      read(s, "duration", sc.duration, "scenario");
      read(s, "low_noise_std", sc.low_noise_std, "scenario");
      read(s, "high_noise_std", sc.high_noise_std, "scenario");
      read(s, "zeta_std", sc.zeta_std, "scenario");
      read(s, "zeta_cutoff", sc.zeta_cutoff, "scenario");
      if (s.contains("schedule")) {
        explicit_schedule = true;
        sc.schedule.switches.clear();
        for (const auto& sw : s["schedule"]) {
          const auto pair = sw.get<std::vector<double>>();
          if (pair.size() != 2) throw ConfigError("scenario.schedule: entries are [time, level]");
          sc.schedule.switches.push_back({pair[0], pair[1]});
        }
      }
      if (s.contains("train_until") && !s["train_until"].is_null()) {
        cfg.estimator.train_until = s["train_until"].get<double>();
      }
    }
    if (!explicit_schedule) sc.schedule = sim::default_schedule(sc.duration);

    if (doc.contains("harness")) {
      const auto& h = doc["harness"];
      reject_unknown(h,
                     {"scenarios", "estimators", "seeds", "warmup", "snapshot_times", "snapshot_resolution",
                      "threads"},
                     "harness");
      if (h.contains("scenarios")) {
        cfg.scenarios.clear();
        for (const auto& s : h["scenarios"]) cfg.scenarios.push_back(sim::parse_scenario(s.get<std::string>()));
      }
      if (h.contains("estimators")) {
        cfg.estimators.clear();
        for (const auto& s : h["estimators"]) cfg.estimators.push_back(sim::parse_estimator(s.get<std::string>()));
      }
      if (h.contains("seeds")) {
        const auto& s = h["seeds"];
        reject_unknown(s, {"first", "count"}, "harness.seeds");
        read(s, "first", cfg.seeds.first, "harness.seeds");
        read(s, "count", cfg.seeds.count, "harness.seeds");
      }
      read(h, "warmup", cfg.warmup, "harness");
      read(h, "snapshot_times", cfg.estimator.snapshot_times, "harness");
      read(h, "snapshot_resolution", cfg.snapshot_resolution, "harness");
      read(h, "threads", cfg.threads, "harness");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (!config_values_valid(cfg)) throw ConfigError("config: invalid scenario timing or noise values");
  return cfg;
}

inline HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

/// Full config with every default written out.
inline json to_json(const HarnessConfig& cfg) {
  const auto& e = cfg.estimator;
  const auto& s = cfg.scenario;
  json axes = json::array();
  for (const auto& a : e.grid.axes()) axes.push_back({{"points", a.points}, {"lower", a.lower}, {"upper", a.upper}});
  json schedule = json::array();
  for (const auto& sw : s.schedule.switches) schedule.push_back({sw.time, sw.level});
  json scenarios = json::array();
  for (auto id : cfg.scenarios) scenarios.push_back(std::string(sim::to_string(id)));
  json estimators = json::array();
  for (auto id : cfg.estimators) estimators.push_back(std::string(sim::to_string(id)));

  return {
      {"kernel", {{"length_scale", e.kernel.length_scale()}, {"signal_std", e.kernel.signal_std()}}},
      {"grid", {{"axes", axes}}},
      {"rgp", {{"process_std", e.gp_process_std}, {"cov_bound", e.cov_bound ? json(*e.cov_bound) : json(nullptr)}}},
      {"ekf",
       {{"process_var", {e.process_var(0), e.process_var(1)}},
        {"initial_state_var", {e.initial_state_var(0), e.initial_state_var(1)}},
        {"residual_std", e.residual_std}}},
      {"baseline",
       {{"measurement_std", cfg.baseline_measurement_std ? json(*cfg.baseline_measurement_std) : json(nullptr)},
        {"tuning",
         {{"min_factor", cfg.tuning.min_factor},
          {"max_factor", cfg.tuning.max_factor},
          {"points", cfg.tuning.points},
          {"seed", cfg.tuning.seed}}}}},
      {"scenario",
       {{"sample_time", s.sample_time},
        {"duration", s.duration},
        {"low_noise_std", s.low_noise_std},
        {"high_noise_std", s.high_noise_std},
        {"zeta_std", s.zeta_std},
        {"zeta_cutoff", s.zeta_cutoff},
        {"schedule", schedule},
        {"train_until", std::isfinite(e.train_until) ? json(e.train_until) : json(nullptr)}}},
      {"harness",
       {{"scenarios", scenarios},
        {"estimators", estimators},
        {"seeds", {{"first", cfg.seeds.first}, {"count", cfg.seeds.count}}},
        {"warmup", cfg.warmup},
        {"snapshot_times", e.snapshot_times},
        {"snapshot_resolution", cfg.snapshot_resolution},
        {"threads", cfg.threads}}},
  };
}

} // namespace rgpdkf::harness
