// Command-line driver: single scenarios, DAgger training, policy
// evaluation, parameter sweeps and the quick invariant suite.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "microsim/config_file.hpp"
#include "microsim/io.hpp"
#include "microsim/selftest.hpp"

namespace fs = std::filesystem;
using namespace microsim;

namespace {

FullConfig load_with_seed(const std::string& config_path,
                          const std::optional<std::uint64_t>& seed) {
  FullConfig cfg = load_config(config_path);
  if (seed) cfg.sim.seed = *seed;
  return cfg;
}

int cmd_simulate(const std::string& config_path,
                 const std::optional<std::uint64_t>& seed,
                 const std::string& out_dir) {
  const FullConfig cfg = load_with_seed(config_path, seed);
  ScenarioTemplate scn = cfg.scenario();
  std::optional<MlpParams> policy;
  if (cfg.controller == "baseline") {
    scn.sim.penetration = 0.0;
  } else if (cfg.controller == "imitated") {
    if (cfg.checkpoint.empty())
      throw ConfigError("controller 'imitated' requires a checkpoint");
    policy = load_checkpoint(cfg.checkpoint);
  }

  AvDriver driver(scn, policy ? &*policy : nullptr);
  Simulation sim(scn.network, scn.sim, scn.idm);
  RunResult run = sim.run_scenario(&driver);
  run.stats.interventions = driver.interventions();

  fs::create_directories(out_dir);
  write_trajectory_csv(out_dir + "/trajectory.csv", run.log);
  const MetricsRecord m =
      compute_metrics(run.log, scn.network, scn.sim, cfg.energy, run.stats);
  const SpaceTimeGrid grid = bin_space_time(run.log, scn.network);
  const double wi = grid.nt >= 10 ? wave_index(grid) : 0.0;
  write_metrics_csv(out_dir + "/metrics.csv", m, wi);
  write_spacetime_csv(grid, out_dir);
  std::printf(
      "simulate: controller=%s inflow=%g limit=%g seed=%llu\n"
      "  mpg=%.3f mean_abs_accel=%.4f throughput=%.1f wave_index=%.3f "
      "min_gap=%.3f interventions=%lld\n",
      cfg.controller.c_str(), scn.sim.inflow_rate,
      scn.network.downstream_speed_limit,
      static_cast<unsigned long long>(scn.sim.seed), m.mpg, m.mean_abs_accel,
      m.throughput, wi, m.min_gap,
      static_cast<long long>(m.intervention_count));
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::optional<std::uint64_t>& seed,
              const std::string& out_dir) {
  FullConfig cfg = load_config(config_path);
  if (seed) cfg.dagger.seeds = {*seed};
  const ScenarioTemplate scn = cfg.scenario();
  fs::create_directories(out_dir);

  std::vector<std::vector<EpochRow>> curves;
  for (const std::uint64_t s : cfg.dagger.seeds) {
    DaggerResult result = run_dagger(scn, cfg.dagger, cfg.train, s);
    const std::string tag = std::to_string(s);
    save_checkpoint(result.policy, out_dir + "/policy_seed" + tag + ".bin");
    write_learning_curve_csv(out_dir + "/learning_curve_seed" + tag + ".csv",
                             result.curve);
    std::printf("train: seed=%llu final_train_mse=%.6g samples=%ld\n",
                static_cast<unsigned long long>(s),
                result.curve.back().train_mse, result.final_dataset_size);
    curves.push_back(std::move(result.curve));
  }

  // Seed-mean curve; held-out values averaged where every seed evaluated.
  std::vector<EpochRow> mean_curve;
  for (std::size_t e = 0; e < curves.front().size(); ++e) {
    EpochRow row;
    row.epoch = curves.front()[e].epoch;
    double heldout = 0.0;
    bool have_heldout = true;
    for (const auto& curve : curves) {
      row.train_mse += curve[e].train_mse;
      row.samples = curve[e].samples;
      if (std::isfinite(curve[e].heldout_mse))
        heldout += curve[e].heldout_mse;
      else
        have_heldout = false;
    }
    row.train_mse /= static_cast<double>(curves.size());
    if (have_heldout) row.heldout_mse = heldout / static_cast<double>(curves.size());
    mean_curve.push_back(row);
  }
  write_learning_curve_csv(out_dir + "/learning_curve.csv", mean_curve);
  return 0;
}

int cmd_evaluate(const std::string& config_path,
                 const std::optional<std::uint64_t>& seed,
                 const std::string& checkpoint_path,
                 const std::string& out_dir) {
  FullConfig cfg = load_with_seed(config_path, seed);
  const std::string ckpt =
      checkpoint_path.empty() ? cfg.checkpoint : checkpoint_path;
  if (ckpt.empty()) throw ConfigError("evaluate requires a checkpoint");
  const MlpParams policy = load_checkpoint(ckpt);
  const ScenarioTemplate scn = cfg.scenario();

  const MseReport report =
      evaluate_policy_mse(policy, scn, cfg.dagger.heldout, cfg.sim.seed);
  std::printf("evaluate: heldout_mse=%.6g over %zu scenarios\n", report.mean,
              report.per_scenario.size());
  for (const auto& [inflow, limit, mse] : report.per_scenario)
    std::printf("  inflow=%g limit=%g mse=%.6g\n", inflow, limit, mse);

  // Run-level metrics at the config's own boundary condition.
  AvDriver driver(scn, &policy);
  Simulation sim(scn.network, scn.sim, scn.idm);
  RunResult run = sim.run_scenario(&driver);
  run.stats.interventions = driver.interventions();
  const MetricsRecord m =
      compute_metrics(run.log, scn.network, scn.sim, cfg.energy, run.stats);
  const SpaceTimeGrid grid = bin_space_time(run.log, scn.network);
  const double wi = grid.nt >= 10 ? wave_index(grid) : 0.0;
  std::printf("  mpg=%.3f mean_abs_accel=%.4f throughput=%.1f wave_index=%.3f\n",
              m.mpg, m.mean_abs_accel, m.throughput, wi);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_metrics_csv(out_dir + "/metrics.csv", m, wi);
    std::FILE* f = std::fopen((out_dir + "/heldout_mse.csv").c_str(), "w");
    if (!f) throw ConfigError("cannot open heldout_mse.csv for writing");
    std::fputs("inflow,limit,mse\n", f);
    for (const auto& [inflow, limit, mse] : report.per_scenario)
      std::fprintf(f, "%g,%g,%.9g\n", inflow, limit, mse);
    std::fclose(f);
  }
  return 0;
}

int cmd_sweep(const std::string& config_path,
              const std::optional<std::uint64_t>& seed,
              const std::string& out_dir) {
  FullConfig cfg = load_config(config_path);
  if (seed) cfg.sweep.seeds = {*seed};
  const SweepResult result =
      run_sweep(cfg.sweep, cfg.scenario(), cfg.energy, out_dir);
  std::printf("sweep: %zu rows (%d executed, %d resumed) -> %s\n",
              result.rows.size(), result.executed, result.skipped,
              out_dir.c_str());
  return 0;
}

int cmd_selftest() {
  const SelftestResult result = run_selftest();
  for (const auto& [name, ok] : result.checks)
    std::printf("%-45s %s\n", name.c_str(), ok ? "PASS" : "FAIL");
  return result.all_passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"microscopic mixed-autonomy traffic simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool need_out) {
    sub->add_option("--config", config_path, "flat key = value config file")
        ->required();
    sub->add_option("--seed", seed, "override the config seed");
    auto* out = sub->add_option("--out", out_dir, "output directory");
    if (need_out) out->required();
  };

  CLI::App* simulate = app.add_subcommand(
      "simulate", "run one scenario; writes trajectory and metrics CSVs");
  add_common(simulate, true);
  CLI::App* train = app.add_subcommand(
      "train", "DAgger training; writes checkpoints and learning curves");
  add_common(train, true);
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "held-out MSE and run metrics for a checkpoint");
  add_common(evaluate, false);
  evaluate->add_option("--checkpoint", checkpoint_path, "policy checkpoint");
  CLI::App* sweep = app.add_subcommand(
      "sweep", "grid of runs over boundary conditions and controllers");
  add_common(sweep, true);
  app.add_subcommand("selftest", "run the quick invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (train->parsed()) return cmd_train(config_path, seed, out_dir);
    if (evaluate->parsed())
      return cmd_evaluate(config_path, seed, checkpoint_path, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, seed, out_dir);
    return cmd_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return 2;
  }
}
