#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "microsim/imitation.hpp"
#include "microsim/metrics.hpp"

namespace microsim {

// Grid of scenario runs over boundary conditions, penetration, human-driver
// parameters, controllers and seeds.
struct SweepSpec {
  std::vector<double> inflows{2100};
  std::vector<double> limits{5};
  std::vector<double> penetrations{0.025, 0.05, 0.075, 0.10};
  std::vector<double> idm_a{1.3};
  std::vector<double> lc_eagerness{1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  // baseline|expert|imitated_current|imitated_history
  std::vector<std::string> controllers{"baseline", "expert"};
  std::string checkpoint_current;
  std::string checkpoint_history;
  int workers = 1;

  void validate() const;
};

struct SweepRow {
  double inflow = 0.0;
  double limit = 0.0;
  double penetration = 0.0;
  double idm_a = 0.0;
  double lc_eagerness = 0.0;
  std::string controller;
  std::uint64_t seed = 0;
  MetricsRecord metrics;
  double wave_index = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // deterministic grid order
  int executed = 0;            // cells simulated this invocation
  int skipped = 0;             // cells restored from existing output files
};

// Executes every grid cell x seed, writing one per-cell CSV under out_dir so
// interrupted sweeps resume (cells with existing files are not re-run), plus
// sweep.csv with every row and sweep_mean.csv with seed-averaged rows.
// Cells run on up to `workers` threads; each cell owns its output file.
// Referenced checkpoints are loaded before any simulation starts.
SweepResult run_sweep(const SweepSpec& sweep, const ScenarioTemplate& base,
                      const EnergyModelParams& energy,
                      const std::string& out_dir);

}  // namespace microsim
