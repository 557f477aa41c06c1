#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace microsim {

// Invalid configuration values; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Faults raised while a simulation or training run is executing.
class SimFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents (CSV logs, checkpoints, config files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Topology { open_highway, ring };
enum class VehicleKind { human, av };

const char* to_string(Topology t);
const char* to_string(VehicleKind k);

// Road geometry and the downstream bottleneck. The default is a 1-mile,
// 5-lane segment whose rightmost 100 m carry a reduced speed limit that
// restricts outflow.
struct NetworkSpec {
  double length_m = 1609.0;
  int num_lanes = 5;
  double speed_limit_zone_length_m = 100.0;
  double downstream_speed_limit = 5.0;  // m/s, sampled from {5, 6, 7}
  double mainline_speed_limit = 30.0;   // m/s
  Topology topology = Topology::open_highway;

  bool in_speed_limit_zone(double position) const {
    return topology == Topology::open_highway &&
           position >= length_m - speed_limit_zone_length_m;
  }

  void validate() const;  // throws ConfigError naming the offending field
};

struct SimConfig {
  double dt = 0.4;            // s
  double warmup_s = 3600.0;   // all-human period before control begins
  double horizon_s = 600.0;   // measured period
  double inflow_rate = 2100;  // veh/hr/lane
  double penetration = 0.05;  // fraction of vehicles acting as AVs
  std::uint64_t seed = 0;
  double lc_eagerness = 1.0;  // scales the lane-change incentive threshold
  int ring_vehicles = 22;     // ring topology only

  void validate() const;
};

struct VehicleState {
  int id = -1;
  int lane = 0;
  double position = 0.0;  // front bumper, meters from the upstream boundary
  double speed = 0.0;     // m/s, never negative
  double accel = 0.0;     // last applied acceleration, m/s^2
  VehicleKind kind = VehicleKind::human;
  double length = 5.0;  // m
  double lc_cooldown = 0.0;  // s until the next permitted lane change
  // Ring topology: bumper-to-bumper gap to the leader. Maintained
  // incrementally from speeds so that a uniform platoon stays exactly
  // uniform under noise-free dynamics.
  double ring_gap = 0.0;
};

struct TrajectoryRow {
  double time = 0.0;
  int id = -1;
  int lane = 0;
  double position = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  VehicleKind kind = VehicleKind::human;
};

}  // namespace microsim
