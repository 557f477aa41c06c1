#include "microsim/types.hpp"

namespace microsim {

const char* to_string(Topology t) {
  return t == Topology::ring ? "ring" : "open_highway";
}

const char* to_string(VehicleKind k) {
  return k == VehicleKind::av ? "av" : "human";
}

void NetworkSpec::validate() const {
  if (!(length_m > 0.0)) throw ConfigError("network length_m must be > 0");
  if (num_lanes < 1) throw ConfigError("network num_lanes must be >= 1");
  if (topology == Topology::open_highway) {
    if (!(speed_limit_zone_length_m > 0.0))
      throw ConfigError("network speed_limit_zone_length_m must be > 0");
    if (!(length_m > speed_limit_zone_length_m))
      throw ConfigError(
          "network length_m must exceed speed_limit_zone_length_m");
    if (!(downstream_speed_limit < mainline_speed_limit))
      throw ConfigError(
          "network downstream_speed_limit must be below mainline_speed_limit");
  }
  if (!(downstream_speed_limit > 0.0))
    throw ConfigError("network downstream_speed_limit must be > 0");
  if (!(mainline_speed_limit > 0.0))
    throw ConfigError("network mainline_speed_limit must be > 0");
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("sim dt must be > 0");
  if (warmup_s < 0.0) throw ConfigError("sim warmup_s must be >= 0");
  if (horizon_s < 0.0) throw ConfigError("sim horizon_s must be >= 0");
  if (!(inflow_rate > 0.0)) throw ConfigError("sim inflow_rate must be > 0");
  if (penetration < 0.0 || penetration > 1.0)
    throw ConfigError("sim penetration must be in [0, 1]");
  if (lc_eagerness < 0.0) throw ConfigError("sim lc_eagerness must be >= 0");
  if (ring_vehicles < 1) throw ConfigError("sim ring_vehicles must be >= 1");
}

}  // namespace microsim
