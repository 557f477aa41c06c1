#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "microsim/follower_stopper.hpp"
#include "microsim/mlp.hpp"
#include "microsim/observation.hpp"
#include "microsim/simulation.hpp"

namespace microsim {

// Everything needed to instantiate one scenario run.
struct ScenarioTemplate {
  NetworkSpec network;
  SimConfig sim;
  IdmParams idm;
  FollowerStopperParams fs;
  ObservationSpec obs;
};

// DAgger schedule and boundary-condition distribution.
struct DaggerConfig {
  int init_rollouts = 20;
  long init_samples = 30000;
  long samples_per_epoch = 7500;
  int epochs = 100;
  long total_samples_target = 750000;
  std::vector<double> inflow_grid{1900, 1950, 2000, 2050, 2100,
                                  2150, 2200, 2250, 2300};
  std::vector<double> limit_grid{5, 6, 7};
  // Held-out (inflow, limit) pairs; inflows sit off the training grid.
  std::vector<std::pair<double, double>> heldout;
  int eval_every = 10;  // held-out evaluation cadence (first/last always)
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  void validate() const;
  static DaggerConfig paper_scale();
  // Small preset that exercises every code path within minutes.
  static DaggerConfig desk_scale();
};

struct PolicyTrainParams {
  std::vector<int> hidden{32, 32, 32};
  double dropout = 0.1;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 128;

  std::vector<int> layer_sizes(int input_dim) const;
  void validate() const;
};

// Policy action range; matches the expert label range produced by
// speed_command_to_accel with the default clipping.
inline constexpr double kActionMin = -3.0;
inline constexpr double kActionMax = 1.0;

struct AvDriverOptions {
  bool collect_samples = false;  // record (observation, expert label)
  bool record_actions = false;   // record (chosen action, expert label)
  bool supervisor = true;        // active in policy mode only
};

// Drives AV-tagged vehicles. In expert mode the applied action is the
// Follower Stopper label itself; in policy mode it is the clipped network
// output, guarded by a safety supervisor that brakes when the next-step gap
// would drop below 1 m (interventions are still labeled by the expert).
class AvDriver : public AccelProvider {
 public:
  using Options = AvDriverOptions;

  AvDriver(const ScenarioTemplate& scenario, const MlpParams* policy,
           Options options = Options());

  double av_accel(const Simulation& sim, const VehicleState& av,
                  const std::optional<LeaderInfo>& leader) override;
  void retire(int vehicle_id) override;

  const Dataset& samples() const { return samples_; }
  Dataset take_samples() { return std::move(samples_); }
  const std::vector<std::pair<double, double>>& action_label_pairs() const {
    return action_labels_;
  }
  std::int64_t interventions() const { return interventions_; }

 private:
  ScenarioTemplate scenario_;
  const MlpParams* policy_;
  Options options_;
  std::int64_t sample_interval_steps_;
  std::unordered_map<int, HistoryBuffer> buffers_;
  Dataset samples_;
  std::vector<std::pair<double, double>> action_labels_;
  std::vector<double> obs_scratch_;
  std::int64_t interventions_ = 0;
};

// Scenario with (inflow, limit) applied on top of the template.
ScenarioTemplate with_boundary(const ScenarioTemplate& base, double inflow,
                               double limit, std::uint64_t seed);

// Runs n expert rollouts with boundary conditions sampled uniformly from the
// configured grids, recording one (observation, label) pair per AV per step,
// then subsamples uniformly at random to `budget` (keeps all if fewer).
Dataset collect_expert_rollouts(const ScenarioTemplate& base,
                                const DaggerConfig& cfg, int n_rollouts,
                                long budget, Rng& rng);

struct EpochRow {
  int epoch = 0;
  double train_mse = 0.0;
  double heldout_mse = std::numeric_limits<double>::quiet_NaN();
  long samples = 0;
  std::int64_t interventions = 0;
};

// One DAgger iteration: roll out the current policy on a freshly sampled
// boundary condition, label every visited AV state with the expert, append
// samples_per_epoch pairs, then run one training epoch over the aggregated
// dataset. Returns the epoch-mean training MSE.
EpochRow dagger_iteration(MlpParams& policy, AdamState& opt, Dataset& data,
                          const ScenarioTemplate& base, const DaggerConfig& cfg,
                          const PolicyTrainParams& train, Rng& rng);

struct MseReport {
  double mean = 0.0;
  // (inflow, limit, mse) per held-out scenario.
  std::vector<std::tuple<double, double, double>> per_scenario;
};

// Rolls out the policy on the given boundary conditions and reports the mean
// squared difference between the policy action and the expert label over all
// AV decisions.
MseReport evaluate_policy_mse(
    const MlpParams& policy, const ScenarioTemplate& base,
    const std::vector<std::pair<double, double>>& scenarios,
    std::uint64_t seed_base);

struct DaggerResult {
  MlpParams policy;
  std::vector<EpochRow> curve;
  long final_dataset_size = 0;
};

// Full training run for one seed: initial expert dataset, then cfg.epochs
// DAgger iterations with held-out evaluation per cfg.eval_every.
DaggerResult run_dagger(const ScenarioTemplate& base, const DaggerConfig& cfg,
                        const PolicyTrainParams& train, std::uint64_t seed);

void write_learning_curve_csv(const std::string& path,
                              const std::vector<EpochRow>& curve);

}  // namespace microsim
