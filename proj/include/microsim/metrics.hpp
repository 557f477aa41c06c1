#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microsim/simulation.hpp"
#include "microsim/types.hpp"

namespace microsim {

// Polynomial fuel-rate surrogate in gal/hr:
//   max(idle_rate, c0 + c1 v + c2 v^2 + c3 v^3 + c4 max(a, 0) v)
// The coefficients approximate a mid-size SUV with a cubic aerodynamic term
// and a positive-power acceleration term; there is no regeneration credit.
// Absolute mpg values depend entirely on this surrogate, so only relative
// comparisons between controllers under the same surrogate are meaningful.
struct EnergyModelParams {
  double idle_rate = 0.18;  // gal/hr at standstill
  double c0 = 0.18;
  double c1 = 0.03;     // gal/hr per m/s (rolling resistance)
  double c2 = 0.0;      // gal/hr per (m/s)^2
  double c3 = 5.7e-5;   // gal/hr per (m/s)^3 (aerodynamic)
  double c4 = 0.216;    // gal/hr per (m/s^2)(m/s) (positive traction power)

  void validate() const;
};

double fuel_rate(double v, double a, const EnergyModelParams& p);

struct MetricsRecord {
  double mpg = 0.0;             // fleet vehicle-miles per gallon
  double mean_abs_accel = 0.0;  // m/s^2 over all vehicles and steps
  double throughput = 0.0;      // veh/hr/lane from exits over the horizon
  std::int64_t intervention_count = 0;
  double min_gap = 0.0;         // m
};

// Aggregates a trajectory log into run-level metrics. Only rows at or after
// the warm-up end are counted; an empty measurement window is an error.
// Fuel is integrated trapezoidally over each vehicle's consecutive rows.
MetricsRecord compute_metrics(const std::vector<TrajectoryRow>& log,
                              const NetworkSpec& spec, const SimConfig& cfg,
                              const EnergyModelParams& energy,
                              const RunStats& stats);

// Binned mean-speed field per lane for wave analysis.
struct SpaceTimeGrid {
  double bin_x = 50.0;
  double bin_t = 10.0;
  double x0 = 0.0;
  double t0 = 0.0;
  double length_m = 0.0;
  int nx = 0;
  int nt = 0;
  int lanes = 0;
  std::vector<double> speed_sum;  // lane-major [lane][ix][it]
  std::vector<std::int64_t> count;

  std::size_t idx(int lane, int ix, int it) const {
    return (static_cast<std::size_t>(lane) * static_cast<std::size_t>(nx) +
            static_cast<std::size_t>(ix)) *
               static_cast<std::size_t>(nt) +
           static_cast<std::size_t>(it);
  }
  bool occupied(int lane, int ix, int it) const {
    return count[idx(lane, ix, it)] > 0;
  }
  double mean_speed(int lane, int ix, int it) const {
    return speed_sum[idx(lane, ix, it)] /
           static_cast<double>(count[idx(lane, ix, it)]);
  }
};

SpaceTimeGrid bin_space_time(const std::vector<TrajectoryRow>& log,
                             const NetworkSpec& spec, double bin_x = 50.0,
                             double bin_t = 10.0);

// Scalar wave-intensity score: the population standard deviation over time
// of each occupied (lane, position) bin's mean speed, averaged over position
// bins in the upstream 80% of the network and then over lanes. Uniform flow
// scores 0; pronounced stop-and-go waves score well above free flow.
double wave_index(const SpaceTimeGrid& grid, double upstream_fraction = 0.8);

// One CSV per lane: t_bin_start,x_bin_start,mean_speed,count.
void write_spacetime_csv(const SpaceTimeGrid& grid,
                         const std::string& out_dir);

}  // namespace microsim
