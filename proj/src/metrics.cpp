#include "microsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace microsim {

namespace {

constexpr double kMetersPerMile = 1609.344;

}  // namespace

void EnergyModelParams::validate() const {
  if (!(idle_rate > 0.0)) throw ConfigError("energy idle_rate must be > 0");
  if (c1 < 0.0 || c2 < 0.0 || c3 < 0.0 || c4 < 0.0)
    throw ConfigError("energy coefficients c1..c4 must be >= 0");
  if (!(c1 > 0.0 || c2 > 0.0 || c3 > 0.0))
    throw ConfigError("energy model must increase with speed");
}

double fuel_rate(double v, double a, const EnergyModelParams& p) {
  const double power_term = p.c4 * std::max(a, 0.0) * v;
  const double rate = p.c0 + p.c1 * v + p.c2 * v * v + p.c3 * v * v * v +
                      power_term;
  return std::max(p.idle_rate, rate);
}

MetricsRecord compute_metrics(const std::vector<TrajectoryRow>& log,
                              const NetworkSpec& spec, const SimConfig& cfg,
                              const EnergyModelParams& energy,
                              const RunStats& stats) {
  energy.validate();
  const double t_start = cfg.warmup_s - 1e-9;
  std::vector<std::size_t> order;
  order.reserve(log.size());
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].time >= t_start) order.push_back(i);
  if (order.empty())
    throw std::invalid_argument(
        "compute_metrics: empty post-warm-up measurement window");
  // Metrics are permutation-invariant over rows: process per vehicle in time
  // order regardless of how the log was stored.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (log[a].id != log[b].id) return log[a].id < log[b].id;
    return log[a].time < log[b].time;
  });

  const double max_step = 1.5 * cfg.dt;
  double gallons = 0.0;
  double meters = 0.0;
  double abs_accel_sum = 0.0;
  int prev_id = -1;
  double prev_time = 0.0;
  double prev_rate = 0.0;
  for (std::size_t i : order) {
    const TrajectoryRow& row = log[i];
    const double rate = fuel_rate(row.speed, row.accel, energy);
    abs_accel_sum += std::abs(row.accel);
    if (row.id == prev_id) {
      const double dt_row = row.time - prev_time;
      if (dt_row > 0.0 && dt_row <= max_step) {
        gallons += 0.5 * (prev_rate + rate) * dt_row / 3600.0;
        meters += row.speed * dt_row;
      }
    }
    prev_id = row.id;
    prev_time = row.time;
    prev_rate = rate;
  }

  MetricsRecord m;
  m.mpg = gallons > 0.0 ? (meters / kMetersPerMile) / gallons : 0.0;
  m.mean_abs_accel = abs_accel_sum / static_cast<double>(order.size());
  const double horizon_hr = cfg.horizon_s / 3600.0;
  m.throughput = horizon_hr > 0.0
                     ? static_cast<double>(stats.exited) /
                           (horizon_hr * static_cast<double>(spec.num_lanes))
                     : 0.0;
  m.intervention_count = stats.interventions;
  m.min_gap = stats.min_gap;
  return m;
}

SpaceTimeGrid bin_space_time(const std::vector<TrajectoryRow>& log,
                             const NetworkSpec& spec, double bin_x,
                             double bin_t) {
  SpaceTimeGrid grid;
  grid.bin_x = bin_x;
  grid.bin_t = bin_t;
  grid.length_m = spec.length_m;
  grid.lanes = spec.num_lanes;
  grid.nx = std::max(1, static_cast<int>(std::ceil(spec.length_m / bin_x)));
  if (log.empty()) {
    grid.nt = 0;
    return grid;
  }
  double t_min = log.front().time;
  double t_max = log.front().time;
  for (const auto& row : log) {
    t_min = std::min(t_min, row.time);
    t_max = std::max(t_max, row.time);
  }
  grid.t0 = std::floor(t_min / bin_t) * bin_t;
  grid.nt = std::max(1, static_cast<int>(std::floor((t_max - grid.t0) / bin_t)) + 1);
  grid.speed_sum.assign(static_cast<std::size_t>(grid.lanes) *
                            static_cast<std::size_t>(grid.nx) *
                            static_cast<std::size_t>(grid.nt),
                        0.0);
  grid.count.assign(grid.speed_sum.size(), 0);
  for (const auto& row : log) {
    if (row.lane < 0 || row.lane >= grid.lanes) continue;
    if (row.position < 0.0 || row.position >= spec.length_m) continue;
    const int ix = std::min(grid.nx - 1,
                            static_cast<int>(row.position / bin_x));
    const int it = std::min(grid.nt - 1,
                            static_cast<int>((row.time - grid.t0) / bin_t));
    const std::size_t k = grid.idx(row.lane, ix, it);
    grid.speed_sum[k] += row.speed;
    ++grid.count[k];
  }
  return grid;
}

double wave_index(const SpaceTimeGrid& grid, double upstream_fraction) {
  if (grid.nt < 10)
    throw std::invalid_argument("wave_index: grid needs >= 10 time columns");
  const double x_cut = upstream_fraction * grid.length_m;
  double lane_sum = 0.0;
  int lanes_counted = 0;
  std::vector<double> speeds;
  for (int lane = 0; lane < grid.lanes; ++lane) {
    double std_sum = 0.0;
    int bins_counted = 0;
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double x_center = grid.x0 + (ix + 0.5) * grid.bin_x;
      if (x_center >= x_cut) continue;
      speeds.clear();
      for (int it = 0; it < grid.nt; ++it)
        if (grid.occupied(lane, ix, it))
          speeds.push_back(grid.mean_speed(lane, ix, it));
      if (speeds.size() < 2) continue;
      const double mean =
          std::accumulate(speeds.begin(), speeds.end(), 0.0) /
          static_cast<double>(speeds.size());
      double var = 0.0;
      for (double s : speeds) var += (s - mean) * (s - mean);
      var /= static_cast<double>(speeds.size());
      std_sum += std::sqrt(var);
      ++bins_counted;
    }
    if (bins_counted > 0) {
      lane_sum += std_sum / static_cast<double>(bins_counted);
      ++lanes_counted;
    }
  }
  return lanes_counted > 0 ? lane_sum / static_cast<double>(lanes_counted)
                           : 0.0;
}

void write_spacetime_csv(const SpaceTimeGrid& grid,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  char buf[64];
  for (int lane = 0; lane < grid.lanes; ++lane) {
    const std::string path =
        out_dir + "/spacetime_lane" + std::to_string(lane) + ".csv";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open space-time CSV: " + path);
    out << "t_bin_start,x_bin_start,mean_speed,count\n";
    for (int it = 0; it < grid.nt; ++it) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        if (!grid.occupied(lane, ix, it)) continue;
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%lld",
                      grid.t0 + it * grid.bin_t, grid.x0 + ix * grid.bin_x,
                      grid.mean_speed(lane, ix, it),
                      static_cast<long long>(grid.count[grid.idx(lane, ix, it)]));
        out << buf << "\n";
      }
    }
  }
}

}  // namespace microsim
