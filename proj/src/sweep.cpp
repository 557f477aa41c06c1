#include "microsim/sweep.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include "microsim/io.hpp"

namespace microsim {

namespace fs = std::filesystem;

void SweepSpec::validate() const {
  if (inflows.empty() || limits.empty() || penetrations.empty() ||
      idm_a.empty() || lc_eagerness.empty() || seeds.empty() ||
      controllers.empty())
    throw ConfigError("sweep grids must be non-empty");
  for (const std::string& c : controllers)
    if (c != "baseline" && c != "expert" && c != "imitated_current" &&
        c != "imitated_history")
      throw ConfigError("sweep controller '" + c + "' is not recognized");
  if (workers < 1) throw ConfigError("sweep workers must be >= 1");
}

namespace {

std::string cell_name(const SweepRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "cell_i%g_l%g_p%g_a%g_e%g_%s_s%llu.csv",
                row.inflow, row.limit, row.penetration, row.idm_a,
                row.lc_eagerness, row.controller.c_str(),
                static_cast<unsigned long long>(row.seed));
  return buf;
}

constexpr char kRowHeader[] =
    "inflow,limit,penetration,idm_a,lc_eagerness,controller,seed,"
    "mpg,mean_abs_accel,throughput,intervention_count,min_gap,wave_index\n";

void write_row(std::FILE* f, const SweepRow& r) {
  std::fprintf(f, "%g,%g,%g,%g,%g,%s,%llu,%.6f,%.6f,%.6f,%lld,%.6f,%.6f\n",
               r.inflow, r.limit, r.penetration, r.idm_a, r.lc_eagerness,
               r.controller.c_str(), static_cast<unsigned long long>(r.seed),
               r.metrics.mpg, r.metrics.mean_abs_accel, r.metrics.throughput,
               static_cast<long long>(r.metrics.intervention_count),
               r.metrics.min_gap, r.wave_index);
}

bool read_cell_metrics(const std::string& path, SweepRow& row) {
  std::ifstream in(path);
  if (!in) return false;
  std::string header, line;
  if (!std::getline(in, header) || !std::getline(in, line)) return false;
  char controller[32] = {0};
  unsigned long long seed = 0;
  long long interventions = 0;
  const int got = std::sscanf(
      line.c_str(), "%lf,%lf,%lf,%lf,%lf,%31[^,],%llu,%lf,%lf,%lf,%lld,%lf,%lf",
      &row.inflow, &row.limit, &row.penetration, &row.idm_a,
      &row.lc_eagerness, controller, &seed, &row.metrics.mpg,
      &row.metrics.mean_abs_accel, &row.metrics.throughput, &interventions,
      &row.metrics.min_gap, &row.wave_index);
  if (got != 13) return false;
  row.controller = controller;
  row.seed = seed;
  row.metrics.intervention_count = interventions;
  return true;
}

SweepRow run_cell(SweepRow row, const ScenarioTemplate& base,
                  const EnergyModelParams& energy, const MlpParams* current,
                  const MlpParams* history) {
  ScenarioTemplate s = with_boundary(base, row.inflow, row.limit, row.seed);
  s.sim.penetration = row.controller == "baseline" ? 0.0 : row.penetration;
  s.idm.a = row.idm_a;
  s.sim.lc_eagerness = row.lc_eagerness;

  const MlpParams* policy = nullptr;
  if (row.controller == "imitated_current") {
    policy = current;
    s.obs.history_n = 0;
  } else if (row.controller == "imitated_history") {
    policy = history;
  }

  AvDriver driver(s, policy);
  Simulation sim(s.network, s.sim, s.idm);
  RunResult run = sim.run_scenario(&driver);
  run.stats.interventions = driver.interventions();
  row.metrics = compute_metrics(run.log, s.network, s.sim, energy,
                                run.stats);
  row.wave_index = wave_index(bin_space_time(run.log, s.network));
  return row;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& sweep, const ScenarioTemplate& base,
                      const EnergyModelParams& energy,
                      const std::string& out_dir) {
  sweep.validate();
  fs::create_directories(out_dir);

  // Checkpoints must resolve before any simulation starts.
  std::optional<MlpParams> current, history;
  for (const std::string& c : sweep.controllers) {
    if (c == "imitated_current" && !current) {
      if (sweep.checkpoint_current.empty() ||
          !fs::exists(sweep.checkpoint_current))
        throw ConfigError("sweep checkpoint_current missing: '" +
                          sweep.checkpoint_current + "'");
      current = load_checkpoint(sweep.checkpoint_current);
    }
    if (c == "imitated_history" && !history) {
      if (sweep.checkpoint_history.empty() ||
          !fs::exists(sweep.checkpoint_history))
        throw ConfigError("sweep checkpoint_history missing: '" +
                          sweep.checkpoint_history + "'");
      history = load_checkpoint(sweep.checkpoint_history);
    }
  }

  // Deterministic grid order; each pending cell owns one slot and one file.
  SweepResult result;
  std::vector<SweepRow> grid;
  for (double inflow : sweep.inflows)
    for (double limit : sweep.limits)
      for (double pen : sweep.penetrations)
        for (double a : sweep.idm_a)
          for (double lc : sweep.lc_eagerness)
            for (const std::string& controller : sweep.controllers)
              for (std::uint64_t seed : sweep.seeds) {
                SweepRow row;
                row.inflow = inflow;
                row.limit = limit;
                row.penetration = pen;
                row.idm_a = a;
                row.lc_eagerness = lc;
                row.controller = controller;
                row.seed = seed;
                grid.push_back(std::move(row));
              }

  result.rows.resize(grid.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string path = out_dir + "/" + cell_name(grid[i]);
    SweepRow restored = grid[i];
    if (fs::exists(path) && read_cell_metrics(path, restored)) {
      result.rows[i] = std::move(restored);
      ++result.skipped;
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= pending.size()) return;
      const std::size_t i = pending[k];
      try {
        SweepRow row = run_cell(grid[i], base, energy,
                                current ? &*current : nullptr,
                                history ? &*history : nullptr);
        const std::string path = out_dir + "/" + cell_name(row);
        std::FILE* f = std::fopen(path.c_str(), "w");
        if (!f) throw ConfigError("cannot open sweep cell file: " + path);
        std::fputs(kRowHeader, f);
        write_row(f, row);
        std::fclose(f);
        result.rows[i] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int n_workers =
      std::max(1, std::min<int>(sweep.workers,
                                static_cast<int>(pending.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  result.executed = static_cast<int>(pending.size());

  std::FILE* all = std::fopen((out_dir + "/sweep.csv").c_str(), "w");
  if (!all) throw ConfigError("cannot open sweep.csv for writing");
  std::fputs(kRowHeader, all);
  for (const SweepRow& row : result.rows) write_row(all, row);
  std::fclose(all);

  // Seed-averaged table in first-seen cell order.
  std::FILE* mean = std::fopen((out_dir + "/sweep_mean.csv").c_str(), "w");
  if (!mean) throw ConfigError("cannot open sweep_mean.csv for writing");
  std::fputs(
      "inflow,limit,penetration,idm_a,lc_eagerness,controller,"
      "mpg,mean_abs_accel,throughput,intervention_count,min_gap,wave_index\n",
      mean);
  const auto n_seeds = static_cast<double>(sweep.seeds.size());
  for (std::size_t i = 0; i < result.rows.size();
       i += sweep.seeds.size()) {
    MetricsRecord acc;
    double wi = 0.0;
    double interventions = 0.0;
    for (std::size_t k = 0; k < sweep.seeds.size(); ++k) {
      const SweepRow& r = result.rows[i + k];
      acc.mpg += r.metrics.mpg;
      acc.mean_abs_accel += r.metrics.mean_abs_accel;
      acc.throughput += r.metrics.throughput;
      acc.min_gap += r.metrics.min_gap;
      interventions += static_cast<double>(r.metrics.intervention_count);
      wi += r.wave_index;
    }
    const SweepRow& head = result.rows[i];
    std::fprintf(mean, "%g,%g,%g,%g,%g,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                 head.inflow, head.limit, head.penetration, head.idm_a,
                 head.lc_eagerness, head.controller.c_str(), acc.mpg / n_seeds,
                 acc.mean_abs_accel / n_seeds, acc.throughput / n_seeds,
                 interventions / n_seeds, acc.min_gap / n_seeds, wi / n_seeds);
  }
  std::fclose(mean);
  return result;
}

}  // namespace microsim
