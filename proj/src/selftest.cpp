#include "microsim/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "microsim/follower_stopper.hpp"
#include "microsim/idm.hpp"
#include "microsim/mlp.hpp"
#include "microsim/simulation.hpp"

namespace microsim {

namespace {

bool idm_equilibrium_family() {
  const IdmParams p;
  for (double v = 1.0; v < p.v0; v += 2.0) {
    const double gap = idm_equilibrium_gap(v, p);
    if (std::abs(idm_accel(v, gap, v, p, 0.0)) > 1e-10) return false;
  }
  return true;
}

bool idm_monotonicity() {
  const IdmParams p;
  for (double v = 0.0; v <= 20.0; v += 2.5) {
    double prev = -1e9;
    for (double gap = 4.0; gap <= 64.0; gap += 4.0) {
      const double a = idm_accel(v, gap, 10.0, p, 0.0);
      if (a <= prev) return false;  // strictly increasing in gap
      prev = a;
    }
  }
  for (double gap = 6.0; gap <= 40.0; gap += 8.0) {
    double prev = 1e9;
    for (double v = 0.0; v <= 20.0; v += 2.0) {
      const double a = idm_accel(v, gap, 10.0, p, 0.0);
      if (a >= prev) return false;  // strictly decreasing in v
      prev = a;
    }
  }
  return true;
}

bool fs_continuity() {
  FollowerStopperParams p;
  Rng rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    p.c = trial % 2 == 0 ? 0.0 : 0.001;
    const double v_av = rng.uniform(0.0, 35.0);
    const double v_lead = rng.uniform(0.0, 35.0);
    const double U = rng.uniform(0.5, 30.0);
    const double dv = v_lead - v_av;
    std::array<double, 3> b{delta_x(1, dv, p), delta_x(2, dv, p),
                            delta_x(3, dv, p)};
    std::sort(b.begin(), b.end());
    for (double bound : b) {
      const double lo =
          fs_command_velocity(v_av, bound * (1.0 - 1e-12), v_lead, U, p);
      const double hi =
          fs_command_velocity(v_av, bound * (1.0 + 1e-12), v_lead, U, p);
      if (std::abs(hi - lo) > 1e-9 * std::max(1.0, U)) return false;
    }
  }
  return true;
}

bool fs_range_and_original_equivalence() {
  FollowerStopperParams p;
  p.c = 0.0;
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const double v_av = rng.uniform(0.0, 35.0);
    const double v_lead = rng.uniform(-2.0, 35.0);
    const double U = rng.uniform(0.0, 30.0);
    const double gap = rng.uniform(0.01, 120.0);
    const double cmd = fs_command_velocity(v_av, gap, v_lead, U, p);
    if (cmd < 0.0 || cmd > U + 1e-12) return false;
    // With c = 0 the controller must reduce to the unmodified piecewise
    // form bit-exactly.
    const double dv = v_lead - v_av;
    std::array<double, 3> b{delta_x(1, dv, p), delta_x(2, dv, p),
                            delta_x(3, dv, p)};
    std::sort(b.begin(), b.end());
    const double v = std::min(std::max(v_lead, 0.0), U);
    double expected;
    if (gap <= b[0]) expected = 0.0;
    else if (gap <= b[1]) expected = v * (gap - b[0]) / (b[1] - b[0]);
    else if (gap <= b[2]) expected = v + (U - v) * (gap - b[1]) / (b[2] - b[1]);
    else expected = U;
    if (cmd != expected) return false;
  }
  return true;
}

bool gradient_check() {
  Rng rng(3);
  MlpParams p = MlpParams::init({4, 8, 8, 1}, 0.0, rng);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const double target = rng.uniform(-1.0, 1.0);
    ForwardCache cache;
    forward(p, x, &cache);
    const Gradients g = backward(p, cache, target);
    const double h = 1e-5;
    for (int probe = 0; probe < 8; ++probe) {
      const auto layer = static_cast<std::size_t>(
          rng.uniform_int(p.weights.size()));
      const auto k = static_cast<std::size_t>(
          rng.uniform_int(p.weights[layer].size()));
      const double saved = p.weights[layer][k];
      p.weights[layer][k] = saved + h;
      const double up = forward(p, x);
      p.weights[layer][k] = saved - h;
      const double dn = forward(p, x);
      p.weights[layer][k] = saved;
      const double fd = ((up - target) * (up - target) -
                         (dn - target) * (dn - target)) /
                        (2.0 * h);
      const double ref = std::max(1e-6, std::abs(fd));
      if (std::abs(g.weights[layer][k] - fd) / ref > 1e-4) return false;
    }
  }
  return true;
}

bool checkpoint_roundtrip() {
  Rng rng(5);
  const MlpParams p = MlpParams::init({18, 32, 32, 32, 1}, 0.1, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "microsim_selftest.ckpt")
          .string();
  save_checkpoint(p, path);
  const MlpParams q = load_checkpoint(path);
  std::filesystem::remove(path);
  if (q.layer_sizes != p.layer_sizes || q.dropout_rate != p.dropout_rate)
    return false;
  for (std::size_t l = 0; l < p.weights.size(); ++l)
    if (q.weights[l] != p.weights[l] || q.biases[l] != p.biases[l])
      return false;
  return true;
}

bool short_run_determinism_and_conservation() {
  NetworkSpec net;
  SimConfig cfg;
  cfg.warmup_s = 40.0;
  cfg.horizon_s = 40.0;
  cfg.penetration = 0.0;
  cfg.seed = 19;
  auto run = [&] {
    Simulation sim(net, cfg);
    RunResult r = sim.run_scenario(nullptr);
    if (sim.spawned() - sim.exited() != sim.vehicle_count())
      r.log.clear();  // conservation violation -> force mismatch
    return r.log;
  };
  const auto a = run();
  const auto b = run();
  if (a.empty() || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].time != b[i].time || a[i].id != b[i].id ||
        a[i].position != b[i].position || a[i].speed != b[i].speed ||
        a[i].accel != b[i].accel)
      return false;
  }
  return true;
}

}  // namespace

SelftestResult run_selftest() {
  SelftestResult result;
  result.checks.emplace_back("idm equilibrium family", idm_equilibrium_family());
  result.checks.emplace_back("idm monotonicity", idm_monotonicity());
  result.checks.emplace_back("follower stopper continuity", fs_continuity());
  result.checks.emplace_back("follower stopper range / c=0 equivalence",
                             fs_range_and_original_equivalence());
  result.checks.emplace_back("mlp gradient finite differences", gradient_check());
  result.checks.emplace_back("checkpoint round-trip", checkpoint_roundtrip());
  result.checks.emplace_back("short-run determinism and conservation",
                             short_run_determinism_and_conservation());
  return result;
}

}  // namespace microsim
