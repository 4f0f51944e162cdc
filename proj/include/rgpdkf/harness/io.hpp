#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgpdkf/metrics.hpp"
#include "rgpdkf/sim.hpp"

namespace rgpdkf::harness {

/// Column order of run-record CSV files. Row k: GP prediction at zeta_k
/// (before the sample trained the GP) and truth/estimate of the state at k+1.
/// Unmeasured or not-applicable values are written as "nan".
inline constexpr const char* kRunCsvHeader =
    "k,t,zeta,u,z_true,x1_true,x2_true,y1,y2,x1_est,x2_est,x1_var,x2_var,gp_mean,gp_var,gp_var_inflated,"
    "innovation,y_gp,train";

inline constexpr const char* kSweepCsvHeader = "zeta,gp_mean,lower_2sigma,upper_2sigma,hidden_z";

namespace detail {

inline void put(std::string& line, double v) {
  char buf[40];
  if (std::isnan(v)) {
    line += "nan";
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
  }
}

} // namespace detail

inline void write_run_csv(const sim::RunRecord& rec, std::ostream& out) {
  out << kRunCsvHeader << '\n';
  std::string line;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    line.clear();
    line += std::to_string(k);
    for (double v : {rec.time[k], rec.zeta[k], rec.u[k], rec.z_true[k], rec.x_true[k](0), rec.x_true[k](1),
                     rec.y[k](0), rec.y[k](1), rec.x_est[k](0), rec.x_est[k](1), rec.x_var[k](0), rec.x_var[k](1),
                     rec.gp_mean[k], rec.gp_var[k], rec.gp_var_inflated[k], rec.innovation[k], rec.y_gp[k]}) {
      line += ',';
      detail::put(line, v);
    }
    line += rec.train[k] ? ",1\n" : ",0\n";
    out << line;
  }
}

inline void write_run_csv(const sim::RunRecord& rec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_run_csv(rec, out);
}

/// Reads the per-step columns back. Snapshots and the final GP are not part
/// of the CSV.
inline sim::RunRecord read_run_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) {
    throw std::runtime_error("read_run_csv: unexpected header");
  }
  sim::RunRecord rec;
  std::vector<double> f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    f.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(std::strtod(cell.c_str(), nullptr));
    if (f.size() != 19) throw std::runtime_error("read_run_csv: expected 19 columns");
    rec.time.push_back(f[1]);
    rec.zeta.push_back(f[2]);
    rec.u.push_back(f[3]);
    rec.z_true.push_back(f[4]);
    rec.x_true.emplace_back(f[5], f[6]);
    rec.y.emplace_back(f[7], f[8]);
    rec.x_est.emplace_back(f[9], f[10]);
    rec.x_var.emplace_back(f[11], f[12]);
    rec.gp_mean.push_back(f[13]);
    rec.gp_var.push_back(f[14]);
    rec.gp_var_inflated.push_back(f[15]);
    rec.innovation.push_back(f[16]);
    rec.y_gp.push_back(f[17]);
    rec.train.push_back(f[18] != 0.0);
  }
  if (rec.time.size() >= 2) rec.sample_time = rec.time[1] - rec.time[0];
  return rec;
}

inline sim::RunRecord read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_run_csv(in);
}

template <typename Truth>
void write_sweep_csv(std::span<const SweepPoint> sweep, Truth&& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kSweepCsvHeader << '\n';
  std::string line;
  for (const auto& p : sweep) {
    line.clear();
    for (double v : {p.zeta, p.mean, p.mean - p.two_sigma, p.mean + p.two_sigma}) {
      detail::put(line, v);
      line += ',';
    }
    detail::put(line, truth(p.zeta));
    line += '\n';
    out << line;
  }
}

} // namespace rgpdkf::harness
