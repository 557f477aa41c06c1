#include "microsim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace microsim {

namespace {

constexpr double kLcThresholdBase = 0.5;  // m/s^2 incentive threshold
constexpr double kLcSafeDecel = 3.0;      // m/s^2 limit on the new follower
constexpr double kLcCooldown = 5.0;       // s between lane changes
constexpr double kEntrySpeedMargin = 2.0; // m/s above the upstream-most vehicle
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Simulation::Simulation(const NetworkSpec& spec, const SimConfig& cfg,
                       const IdmParams& idm)
    : spec_(spec), cfg_(cfg), idm_(idm), rng_(cfg.seed),
      min_gap_seen_(kInf) {
  spec_.validate();
  cfg_.validate();
  idm_.validate();
  lanes_.resize(static_cast<std::size_t>(spec_.num_lanes));
  accel_scratch_.resize(lanes_.size());
  speed_scratch_.resize(lanes_.size());
  next_arrival_.assign(lanes_.size(), 0.0);
  pending_arrivals_.assign(lanes_.size(), 0);

  if (spec_.topology == Topology::ring) {
    // Uniform platoon at the gap-equilibrium speed. All vehicles share the
    // same stored gap and speed value, so the noise-free symmetric fixed
    // point is preserved bit-exactly by the gap-state update in step().
    const int n = cfg_.ring_vehicles;
    const double spacing = spec_.length_m / static_cast<double>(n);
    std::vector<double> positions(static_cast<std::size_t>(n));
    std::vector<double> speeds(static_cast<std::size_t>(n));
    const double gap0 = spacing - VehicleState{}.length;
    if (!(gap0 > 0.0))
      throw ConfigError("sim ring_vehicles leaves no positive gap");
    const double v_eq = idm_equilibrium_speed(gap0, idm_);
    for (int i = 0; i < n; ++i) {
      positions[static_cast<std::size_t>(i)] = static_cast<double>(i) * spacing;
      speeds[static_cast<std::size_t>(i)] = v_eq;
    }
    seed_ring_vehicles(positions, speeds);
    for (auto& v : lanes_[0]) v.ring_gap = gap0;
  }
}

int Simulation::add_vehicle(int lane, double position, double speed,
                            VehicleKind kind) {
  VehicleState v;
  v.id = next_id_++;
  v.lane = lane;
  v.position = position;
  v.speed = speed;
  v.kind = kind;
  insert_sorted(lane, v);
  ++spawned_;
  return v.id;
}

void Simulation::seed_ring_vehicles(std::span<const double> positions,
                                    std::span<const double> speeds) {
  if (spec_.topology != Topology::ring)
    throw ConfigError("seed_ring_vehicles requires ring topology");
  if (positions.size() != speeds.size() || positions.empty())
    throw ConfigError("seed_ring_vehicles: positions/speeds size mismatch");
  auto& lane = lanes_[0];
  lane.clear();
  std::vector<std::size_t> order(positions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return positions[a] < positions[b];
  });
  for (std::size_t i : order) {
    VehicleState v;
    v.id = next_id_++;
    v.lane = 0;
    v.position = positions[i];
    v.speed = speeds[i];
    lane.push_back(v);
    ++spawned_;
  }
  // Platoon order is the vector order; the leader of i is (i+1) mod n.
  const std::size_t n = lane.size();
  for (std::size_t i = 0; i < n; ++i) {
    const VehicleState& lead = lane[(i + 1) % n];
    double ahead = lead.position - lane[i].position;
    if (ahead <= 0.0) ahead += spec_.length_m;
    lane[i].ring_gap = ahead - lead.length;
  }
}

std::int64_t Simulation::vehicle_count() const {
  std::int64_t n = 0;
  for (const auto& lane : lanes_) n += static_cast<std::int64_t>(lane.size());
  return n;
}

std::optional<LeaderInfo> Simulation::leader_at(int lane,
                                                std::size_t index) const {
  const auto& vs = lanes_[static_cast<std::size_t>(lane)];
  if (spec_.topology == Topology::ring) {
    if (vs.size() < 2) return std::nullopt;
    const VehicleState& lead = vs[(index + 1) % vs.size()];
    return LeaderInfo{lead.id, vs[index].ring_gap, lead.speed};
  }
  if (index + 1 >= vs.size()) return std::nullopt;
  const VehicleState& lead = vs[index + 1];
  return LeaderInfo{lead.id,
                    lead.position - lead.length - vs[index].position,
                    lead.speed};
}

std::optional<LeaderInfo> Simulation::leader_of(int vehicle_id) const {
  for (int lane = 0; lane < spec_.num_lanes; ++lane) {
    const auto& vs = lanes_[static_cast<std::size_t>(lane)];
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i].id == vehicle_id) return leader_at(lane, i);
  }
  throw SimFault("leader_of: unknown vehicle id " + std::to_string(vehicle_id));
}

void Simulation::insert_sorted(int lane, VehicleState v) {
  auto& vs = lanes_[static_cast<std::size_t>(lane)];
  auto it = std::lower_bound(
      vs.begin(), vs.end(), v.position,
      [](const VehicleState& a, double pos) { return a.position < pos; });
  vs.insert(it, v);
}

void Simulation::try_spawn(int lane) {
  auto& vs = lanes_[static_cast<std::size_t>(lane)];
  double entry_speed = spec_.mainline_speed_limit;
  if (!vs.empty()) {
    const VehicleState& front = vs.front();  // upstream-most vehicle
    entry_speed =
        std::min(spec_.mainline_speed_limit, front.speed + kEntrySpeedMargin);
    const double gap = front.position - front.length;
    if (!(gap > idm_desired_gap(entry_speed, front.speed, idm_))) {
      ++blocked_inflows_;
      return;
    }
  }
  VehicleState v;
  v.id = next_id_++;
  v.lane = lane;
  v.position = 0.0;
  v.speed = entry_speed;
  if (av_tagging_active_) {
    const bool upstream_most_is_av =
        !vs.empty() && vs.front().kind == VehicleKind::av;
    if (!upstream_most_is_av && rng_.bernoulli(cfg_.penetration))
      v.kind = VehicleKind::av;
  }
  vs.insert(vs.begin(), v);
  ++spawned_;
  --pending_arrivals_[static_cast<std::size_t>(lane)];
}

void Simulation::spawn_inflow() {
  if (spec_.topology == Topology::ring) return;
  const double now = time();
  const double headway = 3600.0 / cfg_.inflow_rate;
  for (int lane = 0; lane < spec_.num_lanes; ++lane) {
    auto& next = next_arrival_[static_cast<std::size_t>(lane)];
    while (next <= now + 1e-9) {
      ++pending_arrivals_[static_cast<std::size_t>(lane)];
      next += headway * rng_.uniform(0.9, 1.1);  // +/-10% jitter per arrival
    }
    if (pending_arrivals_[static_cast<std::size_t>(lane)] > 0) try_spawn(lane);
  }
}

double Simulation::anticipated_accel(int lane, double position,
                                     double speed) const {
  const auto& vs = lanes_[static_cast<std::size_t>(lane)];
  auto it = std::upper_bound(
      vs.begin(), vs.end(), position,
      [](double pos, const VehicleState& a) { return pos < a.position; });
  if (it == vs.end()) return idm_accel(speed, kInf, speed, idm_, 0.0);
  const double gap = it->position - it->length - position;
  return idm_accel(speed, gap, it->speed, idm_, 0.0);
}

bool Simulation::lane_change_safe(int lane, double position, double length,
                                  double speed) const {
  const auto& vs = lanes_[static_cast<std::size_t>(lane)];
  auto it = std::lower_bound(
      vs.begin(), vs.end(), position,
      [](const VehicleState& a, double pos) { return a.position < pos; });
  if (it == vs.begin()) return true;  // no prospective follower
  const VehicleState& follower = *std::prev(it);
  const double gap = position - length - follower.position;
  if (!(gap > 0.0)) return false;
  return idm_accel(follower.speed, gap, speed, idm_, 0.0) >= -kLcSafeDecel;
}

void Simulation::apply_lane_changes() {
  if (spec_.topology == Topology::ring || spec_.num_lanes < 2) return;
  if (!(cfg_.lc_eagerness > 0.0)) return;
  const double threshold = kLcThresholdBase / cfg_.lc_eagerness;
  for (int lane = 0; lane < spec_.num_lanes; ++lane) {
    auto& vs = lanes_[static_cast<std::size_t>(lane)];
    // Downstream-to-upstream sweep; erasing index i leaves 0..i-1 intact.
    for (std::size_t ii = vs.size(); ii-- > 0;) {
      VehicleState veh = vs[ii];
      if (veh.kind != VehicleKind::human || veh.lc_cooldown > 0.0) continue;
      std::optional<LeaderInfo> cur = leader_at(lane, ii);
      const double cur_accel =
          cur ? idm_accel(veh.speed, cur->gap, cur->speed, idm_, 0.0)
              : idm_accel(veh.speed, kInf, veh.speed, idm_, 0.0);
      int best_lane = -1;
      double best_accel = 0.0;
      for (int target : {lane - 1, lane + 1}) {
        if (target < 0 || target >= spec_.num_lanes) continue;
        const double t_accel =
            anticipated_accel(target, veh.position, veh.speed);
        if (t_accel - cur_accel <= threshold) continue;
        if (!lane_change_safe(target, veh.position, veh.length, veh.speed))
          continue;
        if (best_lane < 0 || t_accel > best_accel) {
          best_lane = target;
          best_accel = t_accel;
        }
      }
      if (best_lane >= 0) {
        vs.erase(vs.begin() + static_cast<std::ptrdiff_t>(ii));
        veh.lane = best_lane;
        veh.lc_cooldown = kLcCooldown;
        insert_sorted(best_lane, veh);
      }
    }
  }
}

void Simulation::tag_avs() {
  if (av_tagging_active_) throw SimFault("tag_avs must be called exactly once");
  av_tagging_active_ = true;
  for (auto& vs : lanes_) {
    bool prev_av = false;  // never two consecutive AVs in a lane
    for (auto& v : vs) {
      if (prev_av) {
        prev_av = false;
        continue;
      }
      if (v.kind == VehicleKind::human && rng_.bernoulli(cfg_.penetration)) {
        v.kind = VehicleKind::av;
        prev_av = true;
      }
    }
  }
}

void Simulation::step(AccelProvider* av_provider) {
  const double dt = cfg_.dt;
  const double t_next = static_cast<double>(step_index_ + 1) * dt;

  // Phase 1: accelerations from the frozen pre-step state.
  for (int lane = 0; lane < spec_.num_lanes; ++lane) {
    auto& vs = lanes_[static_cast<std::size_t>(lane)];
    auto& acc = accel_scratch_[static_cast<std::size_t>(lane)];
    acc.resize(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const VehicleState& veh = vs[i];
      const std::optional<LeaderInfo> leader = leader_at(lane, i);
      if (leader) min_gap_seen_ = std::min(min_gap_seen_, leader->gap);
      double a;
      if (veh.kind == VehicleKind::human) {
        const double noise =
            idm_.noise_std > 0.0 ? rng_.normal(0.0, idm_.noise_std) : 0.0;
        if (leader && !(leader->gap > 0.0)) {
          a = kIdmEmergencyDecel;
          ++safety_events_;
        } else if (spec_.in_speed_limit_zone(veh.position)) {
          IdmParams p = idm_;
          p.v0 = std::min(p.v0, spec_.downstream_speed_limit);
          a = leader ? idm_accel(veh.speed, leader->gap, leader->speed, p, noise)
                     : idm_accel(veh.speed, kInf, veh.speed, p, noise);
        } else {
          a = leader
                  ? idm_accel(veh.speed, leader->gap, leader->speed, idm_, noise)
                  : idm_accel(veh.speed, kInf, veh.speed, idm_, noise);
        }
      } else {
        if (av_provider == nullptr)
          throw SimFault("step: AV present but no controller attached");
        a = av_provider->av_accel(*this, veh, leader);
      }
      if (!std::isfinite(a))
        throw SimFault("non-finite acceleration for vehicle " +
                       std::to_string(veh.id) + " at t=" +
                       std::to_string(time()));
      acc[i] = a;
    }
  }

  // Phase 2: kinematics. Speeds are floored at zero; the logged acceleration
  // is the effective one, (v' - v)/dt.
  for (int lane = 0; lane < spec_.num_lanes; ++lane) {
    auto& vs = lanes_[static_cast<std::size_t>(lane)];
    auto& acc = accel_scratch_[static_cast<std::size_t>(lane)];
    auto& spd = speed_scratch_[static_cast<std::size_t>(lane)];
    spd.resize(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i)
      spd[i] = std::max(0.0, vs[i].speed + acc[i] * dt);
    if (spec_.topology == Topology::ring) {
      const std::size_t n = vs.size();
      for (std::size_t i = 0; i < n; ++i)
        vs[i].ring_gap += (spd[(i + 1) % n] - spd[i]) * dt;
    }
    for (std::size_t i = 0; i < vs.size(); ++i) {
      VehicleState& veh = vs[i];
      veh.accel = (spd[i] - veh.speed) / dt;
      veh.speed = spd[i];
      veh.position += veh.speed * dt;
      if (spec_.topology == Topology::ring && veh.position >= spec_.length_m)
        veh.position -= spec_.length_m;
      veh.lc_cooldown = std::max(0.0, veh.lc_cooldown - dt);
      if (logging_)
        log_.push_back({t_next, veh.id, veh.lane, veh.position, veh.speed,
                        veh.accel, veh.kind});
    }
    if (spec_.topology == Topology::open_highway) {
      while (!vs.empty() && vs.back().position > spec_.length_m) {
        if (av_provider != nullptr) av_provider->retire(vs.back().id);
        vs.pop_back();
        ++exited_;
      }
      // Hard braking can reorder vehicles only through a collision; keep the
      // invariant anyway so downstream lookups stay consistent.
      if (!std::is_sorted(vs.begin(), vs.end(),
                          [](const VehicleState& a, const VehicleState& b) {
                            return a.position < b.position;
                          })) {
        std::stable_sort(vs.begin(), vs.end(),
                         [](const VehicleState& a, const VehicleState& b) {
                           return a.position < b.position;
                         });
      }
    }
  }
  ++step_index_;
}

void Simulation::log_snapshot() {
  if (!logging_) return;
  const double t = time();
  for (const auto& vs : lanes_)
    for (const auto& veh : vs)
      log_.push_back({t, veh.id, veh.lane, veh.position, veh.speed, veh.accel,
                      veh.kind});
}

RunResult Simulation::run_scenario(AccelProvider* av_provider,
                                   bool collect_log) {
  const auto warm_steps = static_cast<std::int64_t>(
      std::llround(cfg_.warmup_s / cfg_.dt));
  const auto horizon_steps = static_cast<std::int64_t>(
      std::llround(cfg_.horizon_s / cfg_.dt));

  for (std::int64_t k = 0; k < warm_steps; ++k) {
    spawn_inflow();
    apply_lane_changes();
    step(nullptr);
  }
  tag_avs();

  const std::int64_t exited_before = exited_;
  const std::int64_t spawned_before = spawned_;
  logging_ = collect_log;
  log_snapshot();
  for (std::int64_t k = 0; k < horizon_steps; ++k) {
    spawn_inflow();
    apply_lane_changes();
    step(av_provider);
  }

  RunResult result;
  result.log = std::move(log_);
  log_.clear();
  logging_ = false;
  result.stats.exited = exited_ - exited_before;
  result.stats.spawned = spawned_ - spawned_before;
  result.stats.min_gap = min_gap_seen_;
  return result;
}

double desired_speed_U(const NetworkSpec& spec, const Simulation& sim,
                       DesiredSpeedMode mode) {
  if (mode == DesiredSpeedMode::configured) return spec.downstream_speed_limit;
  double inv_sum = 0.0;
  std::int64_t n = 0;
  for (const auto& lane : sim.lanes()) {
    for (const auto& veh : lane) {
      if (!spec.in_speed_limit_zone(veh.position)) continue;
      inv_sum += 1.0 / veh.speed;  // a stopped vehicle drives the mean to 0
      ++n;
    }
  }
  if (n == 0) return spec.downstream_speed_limit;
  return static_cast<double>(n) / inv_sum;
}

}  // namespace microsim
