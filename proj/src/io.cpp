#include "microsim/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace microsim {

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryRow>& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot open trajectory CSV for writing: " + path);
  std::fputs("time,id,lane,position,speed,accel,kind\n", f);
  for (const TrajectoryRow& r : log)
    std::fprintf(f, "%.6f,%d,%d,%.6f,%.6f,%.6f,%s\n", r.time, r.id, r.lane,
                 r.position, r.speed, r.accel, to_string(r.kind));
  std::fclose(f);
}

std::vector<TrajectoryRow> load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory CSV: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "time,id,lane,position,speed,accel,kind")
    throw ParseError("trajectory CSV parse error at row 1: bad header");
  std::vector<TrajectoryRow> log;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    TrajectoryRow r;
    char kind[16] = {0};
    const int got = std::sscanf(line.c_str(), "%lf,%d,%d,%lf,%lf,%lf,%15s",
                                &r.time, &r.id, &r.lane, &r.position, &r.speed,
                                &r.accel, kind);
    if (got != 7)
      throw ParseError("trajectory CSV parse error at row " +
                       std::to_string(row_no));
    if (std::strcmp(kind, "av") == 0)
      r.kind = VehicleKind::av;
    else if (std::strcmp(kind, "human") == 0)
      r.kind = VehicleKind::human;
    else
      throw ParseError("trajectory CSV parse error at row " +
                       std::to_string(row_no) + ": unknown kind '" +
                       kind + "'");
    log.push_back(r);
  }
  return log;
}

void write_metrics_csv(const std::string& path, const MetricsRecord& m,
                       double wave_index_value) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot open metrics CSV for writing: " + path);
  std::fputs("mpg,mean_abs_accel,throughput,intervention_count,min_gap,wave_index\n",
             f);
  std::fprintf(f, "%.6f,%.6f,%.6f,%lld,%.6f,%.6f\n", m.mpg, m.mean_abs_accel,
               m.throughput, static_cast<long long>(m.intervention_count),
               m.min_gap, wave_index_value);
  std::fclose(f);
}

}  // namespace microsim
