#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "microsim/follower_stopper.hpp"
#include "microsim/rng.hpp"

using namespace microsim;

namespace {

std::array<double, 3> sorted_bounds(double dv, const FollowerStopperParams& p) {
  std::array<double, 3> b{delta_x(1, dv, p), delta_x(2, dv, p),
                          delta_x(3, dv, p)};
  std::sort(b.begin(), b.end());
  return b;
}

// Independent oracle: piecewise-linear interpolation through the branch
// endpoints (b1, 0), (b2, v), (b3, U), flat outside, for c = 0.
double interpolation_oracle(double v_av, double gap, double v_lead, double U,
                            const FollowerStopperParams& p) {
  const auto b = sorted_bounds(v_lead - v_av, p);
  const double v = std::min(std::max(v_lead, 0.0), U);
  if (gap <= b[0]) return 0.0;
  if (gap >= b[2]) return U;
  if (gap <= b[1])
    return 0.0 + (v - 0.0) * (gap - b[0]) / (b[1] - b[0]);
  return v + (U - v) * (gap - b[1]) / (b[2] - b[1]);
}

}  // namespace

TEST_CASE("delta_x formula") {
  const FollowerStopperParams p;
  SUBCASE("zero relative speed returns the rest widths") {
    CHECK(delta_x(1, 0.0, p) == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(delta_x(2, 0.0, p) == doctest::Approx(5.25).epsilon(1e-12));
    CHECK(delta_x(3, 0.0, p) == doctest::Approx(6.0).epsilon(1e-12));
  }
  SUBCASE("opening gap (leader faster) does not inflate") {
    CHECK(delta_x(1, 2.0, p) == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(delta_x(3, 2.0, p) == doctest::Approx(6.0).epsilon(1e-12));
  }
  SUBCASE("closing at 3 m/s inflates the first envelope to 7.5 m") {
    // 4.5 + (-3)^2 / (2 * 1.5) = 7.5, evaluated independently.
    CHECK(delta_x(1, -3.0, p) == doctest::Approx(4.5 + 9.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("invalid k") {
    CHECK_THROWS_AS(delta_x(0, 0.0, p), std::invalid_argument);
    CHECK_THROWS_AS(delta_x(4, 0.0, p), std::invalid_argument);
  }
}

TEST_CASE("command velocity branch examples") {
  FollowerStopperParams p;
  SUBCASE("inside the first envelope the command is zero") {
    CHECK(fs_command_velocity(2.0, 3.0, 2.0, 5.0, p) == 0.0);
  }
  SUBCASE("far gap with c = 0 returns U") {
    p.c = 0.0;
    CHECK(fs_command_velocity(4.0, 1000.0, 10.0, 5.0, p) == 5.0);
  }
  SUBCASE("third-branch blend, hand evaluated") {
    // U=5, v_av=4, v_lead=3: dv=-1 so boundaries are
    // (4.5+1/3, 5.25+1/2, 6+1) = (4.8333, 5.75, 7.0); v = 3.
    // gap=6 -> 3 + 2*(6-5.75)/1.25 = 3.4.
    const auto b = sorted_bounds(-1.0, p);
    CHECK(b[0] == doctest::Approx(4.5 + 1.0 / 3.0).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(5.75).epsilon(1e-12));
    CHECK(b[2] == doctest::Approx(7.0).epsilon(1e-12));
    const double expected = 3.0 + (5.0 - 3.0) * (6.0 - 5.75) / (7.0 - 5.75);
    CHECK(fs_command_velocity(4.0, 6.0, 3.0, 5.0, p) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(3.4).epsilon(1e-12));
  }
  SUBCASE("gap recovery adds the quadratic term beyond the third envelope") {
    p.c = 0.001;
    // dv = 0 keeps dx3 at 6; gap = dx3 + 100 -> U + 0.001 * 100^2 = 15.
    CHECK(fs_command_velocity(5.0, 106.0, 5.0, 5.0, p) ==
          doctest::Approx(15.0).epsilon(1e-12));
  }
}

TEST_CASE("piecewise continuity at every sorted boundary") {
  FollowerStopperParams p;
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    p.c = trial % 2 == 0 ? 0.0 : 0.001;
    const double v_av = rng.uniform(0.0, 35.0);
    const double v_lead = rng.uniform(0.0, 35.0);
    const double U = rng.uniform(0.5, 30.0);
    for (double bound : sorted_bounds(v_lead - v_av, p)) {
      const double lo =
          fs_command_velocity(v_av, bound * (1.0 - 1e-12), v_lead, U, p);
      const double hi =
          fs_command_velocity(v_av, bound * (1.0 + 1e-12), v_lead, U, p);
      REQUIRE(std::abs(hi - lo) <= 1e-9 * std::max(1.0, U));
    }
  }
}

TEST_CASE("range invariant: c = 0 keeps the command in [0, U]") {
  FollowerStopperParams p;
  p.c = 0.0;
  Rng rng(43);
  for (int trial = 0; trial < 5000; ++trial) {
    const double v_av = rng.uniform(0.0, 40.0);
    const double v_lead = rng.uniform(-3.0, 40.0);
    const double U = rng.uniform(0.0, 32.0);
    const double gap = rng.uniform(0.001, 200.0);
    const double cmd = fs_command_velocity(v_av, gap, v_lead, U, p);
    REQUIRE(cmd >= 0.0);
    REQUIRE(cmd <= U + 1e-12);
  }
}

TEST_CASE("c = 0 reduces bit-exactly to the original controller") {
  FollowerStopperParams with_recovery;
  with_recovery.c = 0.0;
  Rng rng(44);
  for (int trial = 0; trial < 5000; ++trial) {
    const double v_av = rng.uniform(0.0, 40.0);
    const double v_lead = rng.uniform(0.0, 40.0);
    const double U = rng.uniform(0.0, 32.0);
    const double gap = rng.uniform(0.001, 200.0);
    // The original controller is the interpolation oracle's closed form.
    const auto b = sorted_bounds(v_lead - v_av, with_recovery);
    const double v = std::min(std::max(v_lead, 0.0), U);
    double original;
    if (gap <= b[0]) original = 0.0;
    else if (gap <= b[1]) original = v * (gap - b[0]) / (b[1] - b[0]);
    else if (gap <= b[2]) original = v + (U - v) * (gap - b[1]) / (b[2] - b[1]);
    else original = U;
    REQUIRE(fs_command_velocity(v_av, gap, v_lead, U, with_recovery) ==
            original);
  }
}

TEST_CASE("matches the dense-grid interpolation oracle") {
  FollowerStopperParams p;
  p.c = 0.0;
  Rng rng(45);
  for (int trial = 0; trial < 200; ++trial) {
    const double v_av = rng.uniform(0.0, 35.0);
    const double v_lead = rng.uniform(0.0, 35.0);
    const double U = rng.uniform(0.5, 30.0);
    for (double gap = 0.25; gap <= 30.0; gap += 0.25) {
      const double oracle = interpolation_oracle(v_av, gap, v_lead, U, p);
      REQUIRE(std::abs(fs_command_velocity(v_av, gap, v_lead, U, p) - oracle) <=
              1e-9);
    }
  }
}

TEST_CASE("nominal parameters keep the raw envelopes nested") {
  // With dx0 ascending and d descending the growth rates 1/(2 d_k) ascend
  // too, so the raw boundaries never cross; the sort in
  // fs_command_velocity only matters for parameter variations that break
  // the d ordering.
  const FollowerStopperParams p;
  for (double dv = 0.0; dv >= -20.0; dv -= 0.5) {
    REQUIRE(delta_x(1, dv, p) <= delta_x(2, dv, p));
    REQUIRE(delta_x(2, dv, p) <= delta_x(3, dv, p));
  }
}

TEST_CASE("sorting keeps the branch conditions nested when envelopes cross") {
  FollowerStopperParams swapped;
  swapped.d = {0.5, 1.0, 1.5};  // deliberately violates the d ordering
  const double dv = -6.0;
  const std::array<double, 3> raw{delta_x(1, dv, swapped),
                                  delta_x(2, dv, swapped),
                                  delta_x(3, dv, swapped)};
  CHECK(raw[0] > raw[2]);  // raw boundaries really do cross
  Rng rng(46);
  for (int trial = 0; trial < 200; ++trial) {
    const double gap = rng.uniform(0.1, 60.0);
    const double cmd = fs_command_velocity(10.0, gap, 4.0, 8.0, swapped);
    REQUIRE(cmd >= 0.0);
    REQUIRE(std::isfinite(cmd));
  }
}

TEST_CASE("lower-level speed tracking with asymmetric clipping") {
  const FollowerStopperParams p;
  const double dt = 0.4;
  CHECK(speed_command_to_accel(7.0, 7.0, p, dt) == 0.0);
  // k_p = 1/dt = 2.5: a 10 m/s error saturates at a_max = 1.
  CHECK(speed_command_to_accel(0.0, 10.0, p, dt) == 1.0);
  CHECK(speed_command_to_accel(10.0, 0.0, p, dt) == -3.0);
  // Inside the clip window the response is proportional.
  CHECK(speed_command_to_accel(5.0, 5.2, p, dt) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
  FollowerStopperParams p;
  p.d = {1.0, 1.0, 0.5};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  FollowerStopperParams q;
  q.c = -0.1;
  CHECK_THROWS_AS(q.validate(), ConfigError);
}
