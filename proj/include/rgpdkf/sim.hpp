#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rgpdkf/baseline.hpp"
#include "rgpdkf/fusion.hpp"
#include "rgpdkf/kernel.hpp"
#include "rgpdkf/rgp.hpp"

namespace rgpdkf::sim {

/// Stable second-order benchmark plant
///   dx/dt = [[0, 1], [-4, -4]] x + [0; 1] u + [0; 1] z,
/// with output maps y1 = [1, 0] x and y2 = I x.
struct BenchmarkPlant {
  Eigen::Matrix2d a = (Eigen::Matrix2d() << 0.0, 1.0, -4.0, -4.0).finished();
  Eigen::Vector2d b{0.0, 1.0};
  Eigen::Vector2d e{0.0, 1.0};
  double sample_time = 0.01;

  /// Explicit-Euler discretization.
  [[nodiscard]] LinearPlant discrete() const {
    const Eigen::MatrixXd ad = Eigen::Matrix2d::Identity() + sample_time * a;
    return LinearPlant(ad, Eigen::MatrixXd(sample_time * b), Eigen::VectorXd(sample_time * e), sample_time);
  }

  /// Discrete filter model measuring the rows of `output_map`.
  [[nodiscard]] LinearModel model(const Eigen::MatrixXd& output_map) const {
    const auto d = discrete();
    return LinearModel{d.a(), d.b(), d.e(), output_map};
  }
};

/// z(zeta) = -10 (1 + 0.1 zeta + zeta^3)
inline double hidden_z(double zeta) { return -10.0 * (1.0 + 0.1 * zeta + zeta * zeta * zeta); }

/// x + T (A x + B u + E z)
inline Eigen::Vector2d euler_step(const Eigen::Vector2d& x, double u, double z, const BenchmarkPlant& plant) {
  if (!(plant.sample_time > 0.0)) throw std::invalid_argument("euler_step: sample time must be positive");
  if (!x.allFinite() || !std::isfinite(u) || !std::isfinite(z)) {
    throw std::invalid_argument("euler_step: non-finite input");
  }
  return x + plant.sample_time * (plant.a * x + plant.b * u + plant.e * z);
}

// ---------------------------------------------------------------------------
// Random numbers

/// splitmix64 finalizer; used to derive independent per-run, per-stream seeds
/// from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Standard normal draws on top of mt19937_64. Box-Muller is spelled out
/// because std::normal_distribution is not reproducible across standard
/// library implementations.
class GaussianSource {
public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (cached_) {
      const double v = *cached_;
      cached_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  std::optional<double> cached_;
};

inline std::size_t step_count(double duration, double sample_time) {
  if (!(sample_time > 0.0) || !(duration >= 0.0)) {
    throw std::invalid_argument("step_count: need sample_time > 0 and duration >= 0");
  }
  return static_cast<std::size_t>(std::llround(duration / sample_time));
}

/// First-order low-pass filtered white Gaussian noise (discrete AR(1) with
/// pole exp(-2 pi f_c T)), scaled so the stationary std equals `target_std`.
/// The filter state is drawn from the stationary distribution, so the series
/// is stationary from the first sample.
inline std::vector<double> colored_noise(std::uint64_t seed, double sample_time, double duration, double cutoff,
                                         double target_std) {
  if (!(cutoff > 0.0)) throw std::invalid_argument("colored_noise: cutoff must be positive");
  if (!(target_std >= 0.0)) throw std::invalid_argument("colored_noise: std must be non-negative");
  const std::size_t n = step_count(duration, sample_time);
  const double pole = std::exp(-2.0 * std::numbers::pi * cutoff * sample_time);
  const double drive = target_std * std::sqrt(1.0 - pole * pole);

  GaussianSource gauss(seed);
  std::vector<double> out(n);
  double state = target_std * gauss();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = state;
    state = pole * state + drive * gauss();
  }
  return out;
}

/// Piecewise-constant input: each entry switches to `level` at `time`.
struct StepSchedule {
  struct Switch {
    double time = 0.0;
    double level = 0.0;
  };
  std::vector<Switch> switches;
};

/// Default benchmark input: six levels in [-1, 1], 5 s dwell, repeating.
inline StepSchedule default_schedule(double duration) {
  static constexpr double kLevels[] = {0.0, 1.0, -0.5, 0.5, -1.0, 0.25};
  constexpr double kDwell = 5.0;
  StepSchedule s;
  std::size_t i = 0;
  for (double t = 0.0; t < duration || i == 0; t += kDwell, ++i) {
    s.switches.push_back({t, kLevels[i % std::size(kLevels)]});
  }
  return s;
}

inline std::vector<double> step_input(const StepSchedule& schedule, double duration, double sample_time) {
  const std::size_t n = step_count(duration, sample_time);
  for (std::size_t i = 1; i < schedule.switches.size(); ++i) {
    if (schedule.switches[i].time < schedule.switches[i - 1].time) {
      throw std::invalid_argument("step_input: switch times must be non-decreasing");
    }
  }
  std::vector<double> out(n, 0.0);
  std::size_t next = 0;
  double level = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    // small slack so a switch at exactly k*T is not missed to rounding
    const double t = static_cast<double>(k) * sample_time + 1e-9 * sample_time;
    while (next < schedule.switches.size() && schedule.switches[next].time <= t) {
      level = schedule.switches[next].level;
      ++next;
    }
    out[k] = level;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios

enum class Scenario { S1, S2, S3 };
enum class Estimator { RgpB, RgpDkf, PurePrediction };

inline std::string_view to_string(Scenario s) {
  switch (s) {
  case Scenario::S1: return "S1";
  case Scenario::S2: return "S2";
  case Scenario::S3: return "S3";
  }
  return "?";
}

inline std::string_view to_string(Estimator e) {
  switch (e) {
  case Estimator::RgpB: return "rgp-b";
  case Estimator::RgpDkf: return "rgp-dkf";
  case Estimator::PurePrediction: return "pure-prediction";
  }
  return "?";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "S1") return Scenario::S1;
  if (s == "S2") return Scenario::S2;
  if (s == "S3") return Scenario::S3;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "'");
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "rgp-b") return Estimator::RgpB;
  if (s == "rgp-dkf") return Estimator::RgpDkf;
  if (s == "pure-prediction") return Estimator::PurePrediction;
  throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

inline constexpr double kLowNoiseStd = 0.01;
inline constexpr double kHighNoiseStd = 0.3;

struct ScenarioConfig {
  Scenario id = Scenario::S2;
  double low_noise_std = kLowNoiseStd;
  double high_noise_std = kHighNoiseStd;
  double sample_time = 0.01;
  double duration = 100.0;
  double zeta_std = 0.4;
  double zeta_cutoff = 0.1;
  StepSchedule schedule = default_schedule(100.0);
  std::uint64_t seed = 0;

  /// S3 measures y1 = x1; S1/S2 measure y2 = x.
  [[nodiscard]] Eigen::MatrixXd output_map() const {
    if (id == Scenario::S3) return Eigen::RowVector2d(1.0, 0.0);
    return Eigen::Matrix2d::Identity();
  }

  /// S1 is the high-noise case.
  [[nodiscard]] double noise_std() const { return id == Scenario::S1 ? high_noise_std : low_noise_std; }

  [[nodiscard]] bool full_state_measured() const { return id != Scenario::S3; }
};

/// Filter and GP settings shared by all estimators in a comparison. Only the
/// baseline measurement std differs between methods.
struct EstimatorConfig {
  KernelSpec kernel;                  // L = 1, sigma_K = 1
  GridSpec grid{11, -1.5, 1.5};
  double residual_std = 0.05;         // sigma_r = 0.05 sigma_K
  double gp_process_std = 0.0;        // sigma_p
  std::optional<double> cov_bound;
  Eigen::Vector2d process_var{1e-8, 1e-8}; // diag(Q_x)
  Eigen::Vector2d initial_state_var{1.0, 1.0};
  double baseline_measurement_std = 20.0; // design sigma_yGP for RGP-B
  double train_until = std::numeric_limits<double>::infinity();
  std::vector<double> snapshot_times;
};

/// Settings used for the benchmark comparison: sigma_K sized to the range of
/// the hidden cubic over the grid, sigma_r = 0.05 sigma_K.
inline EstimatorConfig benchmark_estimator_config() {
  EstimatorConfig est;
  est.kernel = KernelSpec(1.0, 20.0);
  est.residual_std = 0.05 * est.kernel.signal_std();
  return est;
}

struct GpSnapshot {
  double time = 0.0; // training time elapsed
  RgpState gp;
};

/// Per-step log of one simulation. Row k holds the GP prediction at zeta_k
/// made before the sample was used for training, and truth/estimates of the
/// state at step k+1.
struct RunRecord {
  Scenario scenario = Scenario::S2;
  Estimator estimator = Estimator::RgpDkf;
  std::uint64_t seed = 0;
  double sample_time = 0.01;

  std::vector<double> time;
  std::vector<double> zeta;
  std::vector<double> u;
  std::vector<double> z_true;
  std::vector<Eigen::Vector2d> x_true;
  std::vector<Eigen::Vector2d> y;       // NaN for unmeasured channels
  std::vector<Eigen::Vector2d> x_est;
  std::vector<Eigen::Vector2d> x_var;
  std::vector<double> gp_mean;
  std::vector<double> gp_var;
  std::vector<double> gp_var_inflated;
  std::vector<double> innovation;       // first channel
  std::vector<double> y_gp;             // baseline pseudo-measurement, NaN otherwise
  std::vector<bool> train;

  std::vector<GpSnapshot> snapshots;
  RgpState final_gp;

  [[nodiscard]] std::size_t size() const { return time.size(); }

  void reserve(std::size_t n) {
    for (auto* v : {&time, &zeta, &u, &z_true, &gp_mean, &gp_var, &gp_var_inflated, &innovation, &y_gp}) {
      v->reserve(n);
    }
    for (auto* v : {&x_true, &y, &x_est, &x_var}) v->reserve(n);
    train.reserve(n);
  }
};

/// Exogenous signals of one run.
struct ScenarioSignals {
  std::vector<double> zeta;
  std::vector<double> u;
};

inline ScenarioSignals make_signals(const ScenarioConfig& cfg) {
  ScenarioSignals s;
  s.zeta = colored_noise(derive_seed(cfg.seed, 1), cfg.sample_time, cfg.duration, cfg.zeta_cutoff, cfg.zeta_std);
  s.u = step_input(cfg.schedule, cfg.duration, cfg.sample_time);
  return s;
}

/// Closed simulation of one (scenario, estimator) cell. `frozen_gp` is the
/// GP used by the pure-prediction estimator (prior if absent).
inline RunRecord run_scenario(const ScenarioConfig& cfg, Estimator estimator, const EstimatorConfig& est,
                              const std::optional<RgpState>& frozen_gp = std::nullopt) {
  if (estimator == Estimator::RgpB && !cfg.full_state_measured()) {
    throw std::invalid_argument("run_scenario: RGP-B needs full state measurement and cannot run on " +
                                std::string(to_string(cfg.id)));
  }
  BenchmarkPlant plant;
  plant.sample_time = cfg.sample_time;
  const KernelPrecomp pre(est.kernel, est.grid);
  const Eigen::MatrixXd output_map = cfg.output_map();
  const Eigen::Index n_y = output_map.rows();
  const LinearModel model = plant.model(output_map);
  const LinearPlant discrete = plant.discrete();

  const double noise_std = cfg.noise_std();
  const EkfNoise ekf_noise(Eigen::MatrixXd(est.process_var.asDiagonal()),
                           Eigen::MatrixXd::Identity(n_y, n_y) * (noise_std * noise_std), est.residual_std);

  const auto signals = make_signals(cfg);
  const std::size_t n = signals.zeta.size();
  GaussianSource meas_noise(derive_seed(cfg.seed, 2));
  auto measure_full = [&](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(x(0) + noise_std * meas_noise(), x(1) + noise_std * meas_noise());
  };

  RunRecord rec;
  rec.scenario = cfg.id;
  rec.estimator = estimator;
  rec.seed = cfg.seed;
  rec.sample_time = cfg.sample_time;
  rec.reserve(n);

  const Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
  Eigen::Vector2d x = x0;
  Eigen::Vector2d y_full = measure_full(x0); // used by RGP-B only

  // Estimator state
  const Eigen::MatrixXd c_x0 = est.initial_state_var.asDiagonal();
  std::optional<RgpDkf<LinearModel>> dkf;
  RgpState rgp = rgp_init(pre);
  StateBelief pure_belief{Eigen::VectorXd(x0), c_x0};
  RgpState frozen = frozen_gp.value_or(rgp_init(pre));
  const RgpNoise baseline_noise(est.gp_process_std, est.baseline_measurement_std, est.cov_bound);
  if (estimator == Estimator::RgpDkf) {
    dkf.emplace(model, pre, ekf_noise, est.gp_process_std, make_fused_belief(Eigen::VectorXd(x0), c_x0, pre));
  }

  std::size_t next_snapshot = 0;
  std::vector<double> snap_times = est.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());

  const Eigen::VectorXd nan2 = Eigen::Vector2d::Constant(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.sample_time;
    const double zeta = signals.zeta[k];
    const double u = signals.u[k];
    const double z = hidden_z(zeta);
    const Eigen::Vector2d x_next = euler_step(x, u, z, plant);
    const Eigen::Vector2d y_next_full = measure_full(x_next);
    Eigen::Vector2d y_rec = nan2;
    Eigen::VectorXd y_meas(n_y);
    if (n_y == 2) {
      y_meas = y_next_full;
      y_rec = y_next_full;
    } else {
      y_meas(0) = y_next_full(0);
      y_rec(0) = y_next_full(0);
    }
    const bool train = t < est.train_until;
    const Eigen::VectorXd zeta_v = Eigen::VectorXd::Constant(1, zeta);
    const Eigen::VectorXd u_v = Eigen::VectorXd::Constant(1, u);

    Eigen::Vector2d x_est = nan2;
    Eigen::Vector2d x_var = nan2;
    double gp_mean = 0.0;
    double gp_var = 0.0;
    double innovation = std::numeric_limits<double>::quiet_NaN();
    double y_gp = std::numeric_limits<double>::quiet_NaN();

    switch (estimator) {
    case Estimator::RgpDkf: {
      const StepLog log = dkf->step(zeta_v, u_v, y_meas, train);
      x_est = log.state_mean;
      x_var = log.state_var;
      gp_mean = log.gp_mean;
      gp_var = log.gp_var;
      innovation = log.innovation(0);
      break;
    }
    case Estimator::RgpB: {
      const double pseudo = disturbance_measurement(y_next_full, y_full, u_v, discrete);
      const InferenceResult inf = rgp_infer(rgp, zeta_v, pre);
      if (train) rgp = rgp_update(rgp, inf, pseudo, baseline_noise);
      gp_mean = inf.mean;
      gp_var = inf.variance;
      innovation = pseudo - inf.mean;
      y_gp = pseudo;
      break;
    }
    case Estimator::PurePrediction: {
      const PurePrediction pred = pure_predict(pure_belief, frozen, pre, zeta_v, u_v, model, ekf_noise);
      const StateUpdate upd = pure_update(pred.belief, y_meas, model, ekf_noise);
      pure_belief = upd.belief;
      x_est = pure_belief.mean;
      x_var = pure_belief.cov.diagonal();
      gp_mean = pred.inference.mean;
      gp_var = pred.inference.variance;
      innovation = upd.innovation(0);
      break;
    }
    }

    rec.time.push_back(t);
    rec.zeta.push_back(zeta);
    rec.u.push_back(u);
    rec.z_true.push_back(z);
    rec.x_true.push_back(x_next);
    rec.y.push_back(y_rec);
    rec.x_est.push_back(x_est);
    rec.x_var.push_back(x_var);
    rec.gp_mean.push_back(gp_mean);
    rec.gp_var.push_back(gp_var);
    rec.gp_var_inflated.push_back(gp_var + est.residual_std * est.residual_std);
    rec.innovation.push_back(innovation);
    rec.y_gp.push_back(y_gp);
    rec.train.push_back(train);

    x = x_next;
    y_full = y_next_full;

    const double elapsed = static_cast<double>(k + 1) * cfg.sample_time;
    while (next_snapshot < snap_times.size() && snap_times[next_snapshot] <= elapsed + 1e-9 * cfg.sample_time) {
      RgpState snap;
      switch (estimator) {
      case Estimator::RgpDkf: snap = dkf->belief().gp_state(); break;
      case Estimator::RgpB: snap = rgp; break;
      case Estimator::PurePrediction: snap = frozen; break;
      }
      rec.snapshots.push_back({snap_times[next_snapshot], std::move(snap)});
      ++next_snapshot;
    }
  }

  switch (estimator) {
  case Estimator::RgpDkf: rec.final_gp = dkf->belief().gp_state(); break;
  case Estimator::RgpB: rec.final_gp = rgp; break;
  case Estimator::PurePrediction: rec.final_gp = frozen; break;
  }
  return rec;
}

} // namespace rgpdkf::sim
