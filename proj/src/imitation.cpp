#include "microsim/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace microsim {

namespace {

constexpr double kSupervisorMinGap = 1.0;  // m

}  // namespace

void DaggerConfig::validate() const {
  if (init_rollouts < 1) throw ConfigError("dagger init_rollouts must be >= 1");
  if (init_samples < 1) throw ConfigError("dagger init_samples must be >= 1");
  if (samples_per_epoch < 1)
    throw ConfigError("dagger samples_per_epoch must be >= 1");
  if (epochs < 1) throw ConfigError("dagger epochs must be >= 1");
  if (init_samples + static_cast<long>(epochs) * samples_per_epoch !=
      total_samples_target)
    throw ConfigError(
        "dagger total_samples_target must equal init_samples + "
        "epochs * samples_per_epoch");
  if (inflow_grid.empty() || limit_grid.empty())
    throw ConfigError("dagger boundary-condition grids must be non-empty");
  if (eval_every < 1) throw ConfigError("dagger eval_every must be >= 1");
  if (seeds.empty()) throw ConfigError("dagger seeds must be non-empty");
}

DaggerConfig DaggerConfig::paper_scale() {
  DaggerConfig cfg;
  for (double inflow : {1925.0, 2125.0, 2275.0})
    for (double limit : {5.0, 6.0, 7.0}) cfg.heldout.emplace_back(inflow, limit);
  return cfg;
}

DaggerConfig DaggerConfig::desk_scale() {
  DaggerConfig cfg;
  cfg.init_rollouts = 4;
  cfg.init_samples = 5000;
  cfg.samples_per_epoch = 1500;
  cfg.epochs = 10;
  cfg.total_samples_target = 20000;
  cfg.eval_every = 1;
  cfg.seeds = {11, 23};
  cfg.heldout = {{1925, 5}, {2125, 6}, {2275, 7}};
  return cfg;
}

std::vector<int> PolicyTrainParams::layer_sizes(int input_dim) const {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

void PolicyTrainParams::validate() const {
  if (hidden.empty()) throw ConfigError("train hidden layers must be non-empty");
  for (int h : hidden)
    if (h < 1) throw ConfigError("train hidden layer sizes must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train lr must be > 0");
  if (batch_size < 1) throw ConfigError("train batch_size must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("train dropout must be in [0, 1)");
}

AvDriver::AvDriver(const ScenarioTemplate& scenario, const MlpParams* policy,
                   Options options)
    : scenario_(scenario), policy_(policy), options_(options) {
  scenario_.obs.validate();
  sample_interval_steps_ = std::max<std::int64_t>(
      1, std::llround(scenario_.obs.sample_interval_s / scenario_.sim.dt));
  if (policy_ != nullptr && policy_->input_dim() != scenario_.obs.input_dim())
    throw ConfigError("policy input dimension " +
                      std::to_string(policy_->input_dim()) +
                      " does not match observation encoding " +
                      std::to_string(scenario_.obs.input_dim()));
  samples_.input_dim = scenario_.obs.input_dim();
}

double AvDriver::av_accel(const Simulation& sim, const VehicleState& av,
                          const std::optional<LeaderInfo>& leader) {
  const NetworkSpec& net = sim.spec();
  const double dt = sim.config().dt;
  LocalTriple triple;
  triple.v = av.speed;
  triple.gap = leader ? leader->gap : scenario_.obs.no_leader_gap;
  triple.v_lead = leader ? leader->speed : av.speed;

  auto [it, created] = buffers_.try_emplace(av.id, triple, sim.step_index(),
                                            scenario_.obs.history_n);
  HistoryBuffer& buf = it->second;

  const bool need_obs =
      policy_ != nullptr || options_.collect_samples || options_.record_actions;
  if (need_obs) encode_observation(buf, triple, scenario_.obs, obs_scratch_);

  // Expert label: Follower Stopper toward the privileged downstream speed,
  // capped by the zone limit and, with no leader, by the mainline limit.
  const double U = desired_speed_U(net, sim, DesiredSpeedMode::configured);
  double v_cmd = fs_command_velocity(av.speed, triple.gap, triple.v_lead, U,
                                     scenario_.fs);
  if (!leader) v_cmd = std::min(v_cmd, net.mainline_speed_limit);
  if (net.in_speed_limit_zone(av.position))
    v_cmd = std::min(v_cmd, net.downstream_speed_limit);
  const double label = speed_command_to_accel(av.speed, v_cmd, scenario_.fs, dt);

  double action = label;
  if (policy_ != nullptr) {
    const double raw = forward(*policy_, obs_scratch_);
    if (!std::isfinite(raw))
      throw TrainFault("policy produced a non-finite action for vehicle " +
                       std::to_string(av.id));
    action = std::clamp(raw, kActionMin, kActionMax);
    if (net.in_speed_limit_zone(av.position)) {
      // Commanded next-step speed may not exceed the zone limit.
      const double cap = (net.downstream_speed_limit - av.speed) / dt;
      action = std::max(std::min(action, cap), -scenario_.fs.decel_max);
    }
  }
  // The recorded action is what the driving policy chose, before any
  // supervisor override.
  if (options_.record_actions) action_labels_.emplace_back(action, label);
  if (policy_ != nullptr && options_.supervisor && leader) {
    const double v_next = std::max(0.0, av.speed + action * dt);
    const double gap_next = leader->gap + (leader->speed - v_next) * dt;
    if (gap_next < kSupervisorMinGap) {
      action = -scenario_.fs.decel_max;
      ++interventions_;
    }
  }

  if (options_.collect_samples) samples_.append(obs_scratch_, label);
  buf.maybe_sample(triple, sim.step_index(), sample_interval_steps_);
  return action;
}

void AvDriver::retire(int vehicle_id) { buffers_.erase(vehicle_id); }

ScenarioTemplate with_boundary(const ScenarioTemplate& base, double inflow,
                               double limit, std::uint64_t seed) {
  ScenarioTemplate s = base;
  s.sim.inflow_rate = inflow;
  s.network.downstream_speed_limit = limit;
  s.sim.seed = seed;
  return s;
}

namespace {

// Uniform subsample without replacement, preserving draw order determinism.
void subsample_into(Dataset&& src, long budget, Rng& rng, Dataset& dst) {
  const long n = static_cast<long>(src.size());
  if (n <= budget) {
    for (long i = 0; i < n; ++i)
      dst.append(src.row(static_cast<std::size_t>(i)),
                 src.labels[static_cast<std::size_t>(i)]);
    return;
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (long k = 0; k < budget; ++k) {
    const auto j = static_cast<std::size_t>(k) +
                   static_cast<std::size_t>(rng.uniform_int(
                       static_cast<std::uint64_t>(n - k)));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
  }
  for (long k = 0; k < budget; ++k) {
    const std::size_t i = idx[static_cast<std::size_t>(k)];
    dst.append(src.row(i), src.labels[i]);
  }
}

struct RolloutOutput {
  Dataset samples;
  std::int64_t interventions = 0;
};

RolloutOutput rollout(const ScenarioTemplate& scenario, const MlpParams* policy,
                      bool collect) {
  AvDriver::Options opt;
  opt.collect_samples = collect;
  AvDriver driver(scenario, policy, opt);
  Simulation sim(scenario.network, scenario.sim, scenario.idm);
  sim.run_scenario(&driver, /*collect_log=*/false);
  RolloutOutput out;
  out.samples = driver.take_samples();
  out.interventions = driver.interventions();
  return out;
}

ScenarioTemplate sample_boundary(const ScenarioTemplate& base,
                                 const DaggerConfig& cfg, Rng& rng) {
  const double inflow =
      cfg.inflow_grid[rng.uniform_int(cfg.inflow_grid.size())];
  const double limit = cfg.limit_grid[rng.uniform_int(cfg.limit_grid.size())];
  return with_boundary(base, inflow, limit, rng.next_u64());
}

}  // namespace

Dataset collect_expert_rollouts(const ScenarioTemplate& base,
                                const DaggerConfig& cfg, int n_rollouts,
                                long budget, Rng& rng) {
  if (n_rollouts < 1)
    throw std::invalid_argument("collect_expert_rollouts: n_rollouts >= 1");
  Dataset raw;
  raw.input_dim = base.obs.input_dim();
  for (int i = 0; i < n_rollouts; ++i) {
    RolloutOutput out = rollout(sample_boundary(base, cfg, rng), nullptr, true);
    for (std::size_t k = 0; k < out.samples.size(); ++k)
      raw.append(out.samples.row(k), out.samples.labels[k]);
  }
  Dataset result;
  result.input_dim = raw.input_dim;
  subsample_into(std::move(raw), budget, rng, result);
  return result;
}

EpochRow dagger_iteration(MlpParams& policy, AdamState& opt, Dataset& data,
                          const ScenarioTemplate& base, const DaggerConfig& cfg,
                          const PolicyTrainParams& train, Rng& rng) {
  if (data.empty())
    throw std::invalid_argument("dagger_iteration: dataset must be non-empty");
  // Visit states under the current policy; the expert provides every label.
  RolloutOutput out = rollout(sample_boundary(base, cfg, rng), &policy, true);
  Dataset fresh;
  fresh.input_dim = data.input_dim;
  subsample_into(std::move(out.samples), cfg.samples_per_epoch, rng, fresh);
  for (std::size_t k = 0; k < fresh.size(); ++k)
    data.append(fresh.row(k), fresh.labels[k]);

  EpochRow row;
  row.train_mse = train_epoch(policy, opt, data, train.batch_size, rng);
  row.samples = static_cast<long>(data.size());
  row.interventions = out.interventions;
  return row;
}

MseReport evaluate_policy_mse(
    const MlpParams& policy, const ScenarioTemplate& base,
    const std::vector<std::pair<double, double>>& scenarios,
    std::uint64_t seed_base) {
  MseReport report;
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto [inflow, limit] = scenarios[i];
    // Fixed per-scenario seeds keep epochs comparable.
    const std::uint64_t seed =
        seed_base ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(i) + 1));
    ScenarioTemplate s = with_boundary(base, inflow, limit, seed);
    AvDriver::Options opt;
    opt.record_actions = true;
    AvDriver driver(s, &policy, opt);
    Simulation sim(s.network, s.sim, s.idm);
    sim.run_scenario(&driver, /*collect_log=*/false);
    double local = 0.0;
    for (const auto& [action, label] : driver.action_label_pairs())
      local += (action - label) * (action - label);
    const auto n = static_cast<std::int64_t>(driver.action_label_pairs().size());
    report.per_scenario.emplace_back(inflow, limit,
                                     n > 0 ? local / static_cast<double>(n)
                                           : 0.0);
    sum += local;
    count += n;
  }
  report.mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return report;
}

DaggerResult run_dagger(const ScenarioTemplate& base, const DaggerConfig& cfg,
                        const PolicyTrainParams& train, std::uint64_t seed) {
  cfg.validate();
  train.validate();
  Rng rng(seed);
  Dataset data = collect_expert_rollouts(base, cfg, cfg.init_rollouts,
                                         cfg.init_samples, rng);
  MlpParams policy = MlpParams::init(train.layer_sizes(base.obs.input_dim()),
                                     train.dropout, rng);
  AdamState opt = AdamState::init_like(policy, train.lr);
  opt.beta1 = train.beta1;
  opt.beta2 = train.beta2;
  opt.eps = train.eps;

  DaggerResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRow row = dagger_iteration(policy, opt, data, base, cfg, train, rng);
    row.epoch = epoch;
    if (epoch == 1 || epoch == cfg.epochs || epoch % cfg.eval_every == 0)
      row.heldout_mse =
          evaluate_policy_mse(policy, base, cfg.heldout, seed).mean;
    result.curve.push_back(row);
  }
  result.policy = std::move(policy);
  result.final_dataset_size = static_cast<long>(data.size());
  return result;
}

void write_learning_curve_csv(const std::string& path,
                              const std::vector<EpochRow>& curve) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open learning curve file: " + path);
  out << "epoch,train_mse,heldout_mse,samples\n";
  char buf[64];
  for (const EpochRow& row : curve) {
    out << row.epoch << ",";
    std::snprintf(buf, sizeof buf, "%.9g", row.train_mse);
    out << buf << ",";
    if (std::isfinite(row.heldout_mse)) {
      std::snprintf(buf, sizeof buf, "%.9g", row.heldout_mse);
      out << buf;
    }
    out << "," << row.samples << "\n";
  }
}

}  // namespace microsim
