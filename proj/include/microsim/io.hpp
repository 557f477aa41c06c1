#pragma once

#include <string>
#include <vector>

#include "microsim/metrics.hpp"
#include "microsim/types.hpp"

namespace microsim {

// Header: time,id,lane,position,speed,accel,kind — one row per vehicle per
// step, floats in 6-decimal fixed point.
void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& log);

// Throws ParseError naming the offending row number.
std::vector<TrajectoryRow> load_trajectory_csv(const std::string& path);

void write_metrics_csv(const std::string& path, const MetricsRecord& m,
                       double wave_index_value);

}  // namespace microsim
