#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "microsim/idm.hpp"
#include "microsim/rng.hpp"
#include "microsim/types.hpp"

namespace microsim {

class Simulation;

struct LeaderInfo {
  int id = -1;
  double gap = 0.0;  // bumper to bumper, m
  double speed = 0.0;
};

// Acceleration source for AV-tagged vehicles. Human vehicles are driven by
// the built-in IDM. Implementations may keep per-vehicle state (observation
// histories); retire() is called when a vehicle leaves the network.
class AccelProvider {
 public:
  virtual ~AccelProvider() = default;
  virtual double av_accel(const Simulation& sim, const VehicleState& av,
                          const std::optional<LeaderInfo>& leader) = 0;
  virtual void retire(int vehicle_id) { (void)vehicle_id; }
};

struct RunStats {
  std::int64_t exited = 0;        // vehicles that left downstream (window)
  std::int64_t spawned = 0;       // vehicles inserted (window)
  std::int64_t interventions = 0; // safety-supervisor overrides
  double min_gap = 0.0;           // smallest gap observed over the full run
};

struct RunResult {
  std::vector<TrajectoryRow> log;  // post-warm-up rows only
  RunStats stats;
};

// Discrete-time multi-lane highway simulation. One instance is a single
// sequential run; independent runs are safe to execute concurrently.
//
// Update scheme: synchronous first-order Euler. All accelerations are
// computed from the previous step's state, then speeds are floored at zero
// and positions advanced with the new speeds.
class Simulation {
 public:
  Simulation(const NetworkSpec& spec, const SimConfig& cfg,
             const IdmParams& idm = IdmParams{});

  // Per-lane scheduled arrivals at the upstream boundary. An arrival is
  // inserted at position 0 when the gap to the current upstream-most
  // vehicle admits entry at the entry speed without violating the IDM
  // desired gap; blocked arrivals stay queued and retry every step.
  void spawn_inflow();

  // Incentive + safety lane changing for human vehicles. AVs never change
  // lanes. No-op on rings.
  void apply_lane_changes();

  // One synchronous Euler step. `av_provider` may be null only while no AV
  // is present.
  void step(AccelProvider* av_provider = nullptr);

  // Tags vehicles as AVs with probability cfg.penetration, enumerating each
  // lane upstream-to-downstream; two consecutive same-lane vehicles are
  // never both AVs. Subsequent spawns are tagged with the same rule. Must
  // be called exactly once, at the end of warm-up.
  void tag_avs();

  // Full protocol: warm-up with 100% humans, tag_avs, measured horizon with
  // the given AV controller. The returned log covers the warm-up-end
  // snapshot plus every horizon step.
  RunResult run_scenario(AccelProvider* av_provider, bool collect_log = true);

  std::optional<LeaderInfo> leader_of(int vehicle_id) const;

  // Test/setup helpers.
  int add_vehicle(int lane, double position, double speed,
                  VehicleKind kind = VehicleKind::human);
  void seed_ring_vehicles(std::span<const double> positions,
                          std::span<const double> speeds);

  double time() const { return static_cast<double>(step_index_) * cfg_.dt; }
  std::int64_t step_index() const { return step_index_; }
  const NetworkSpec& spec() const { return spec_; }
  const SimConfig& config() const { return cfg_; }
  const IdmParams& idm() const { return idm_; }
  const std::vector<std::vector<VehicleState>>& lanes() const { return lanes_; }
  std::int64_t vehicle_count() const;
  std::int64_t spawned() const { return spawned_; }
  std::int64_t exited() const { return exited_; }
  std::int64_t blocked_inflows() const { return blocked_inflows_; }
  std::int64_t safety_events() const { return safety_events_; }
  double min_gap_seen() const { return min_gap_seen_; }
  bool av_tagging_active() const { return av_tagging_active_; }

  void set_logging(bool on) { logging_ = on; }
  const std::vector<TrajectoryRow>& log() const { return log_; }
  std::vector<TrajectoryRow> take_log() { return std::move(log_); }
  void log_snapshot();  // append one row per vehicle at the current time

 private:
  std::optional<LeaderInfo> leader_at(int lane, std::size_t index) const;
  double anticipated_accel(int lane, double position, double speed) const;
  bool lane_change_safe(int lane, double position, double length,
                        double speed) const;
  void insert_sorted(int lane, VehicleState v);
  void try_spawn(int lane);

  NetworkSpec spec_;
  SimConfig cfg_;
  IdmParams idm_;
  Rng rng_;
  std::vector<std::vector<VehicleState>> lanes_;  // ascending position
  std::vector<std::vector<double>> accel_scratch_;
  std::vector<std::vector<double>> speed_scratch_;
  std::vector<double> next_arrival_;  // per-lane next scheduled arrival time
  std::vector<int> pending_arrivals_; // arrivals due but not yet inserted
  std::vector<TrajectoryRow> log_;
  std::int64_t step_index_ = 0;
  int next_id_ = 0;
  std::int64_t spawned_ = 0;
  std::int64_t exited_ = 0;
  std::int64_t blocked_inflows_ = 0;
  std::int64_t safety_events_ = 0;
  double min_gap_seen_;
  bool av_tagging_active_ = false;
  bool logging_ = false;
};

enum class DesiredSpeedMode { configured, measured };

// Desired speed U for the expert controller. `configured` returns the
// network's downstream speed limit (privileged non-local information);
// `measured` returns the harmonic-mean speed of vehicles currently inside
// the speed-limit zone, falling back to `configured` when the zone is empty.
double desired_speed_U(const NetworkSpec& spec, const Simulation& sim,
                       DesiredSpeedMode mode);

}  // namespace microsim
