#pragma once

#include <array>

#include "microsim/types.hpp"

namespace microsim {

// Follower Stopper velocity controller. The controller tracks a desired
// speed U while shaping the gap to the leader through three nested safety
// envelopes dx_1 <= dx_2 <= dx_3. With c > 0 the command speed gains a
// quadratic gap-recovery term beyond dx_3 so the controller closes
// excessive headways instead of holding U indefinitely.
struct FollowerStopperParams {
  std::array<double, 3> dx0{4.5, 5.25, 6.0};  // envelope widths at dv = 0, m
  std::array<double, 3> d{1.5, 1.0, 0.5};     // envelope decelerations, m/s^2
  double a_max = 1.0;      // command acceleration ceiling, m/s^2
  double c = 0.001;        // gap-recovery gain, 1/(m s); 0 disables
  double decel_max = 3.0;  // command deceleration floor (magnitude), m/s^2
  double k_p = 0.0;        // speed-tracking gain, 1/s; 0 means 1/dt

  void validate() const;
};

// Envelope boundary k in {1, 2, 3} for relative speed dv = v_lead - v_av:
//   dx_k = dx_k^0 + min(dv, 0)^2 / (2 d_k)
// Only the closing arm inflates the envelope. Returned raw; callers sort
// the three values before region tests (d_1 > d_3 lets dx_1 overtake dx_3
// at large closing speeds).
double delta_x(int k, double dv, const FollowerStopperParams& p);

// Piecewise command velocity: 0 below the first envelope, a ramp of
// v = clamp(v_lead, 0, U) between the first two, a blend v -> U between the
// last two, and U (plus the gap-recovery term when c > 0) beyond.
double fs_command_velocity(double v_av, double gap, double v_lead, double U,
                           const FollowerStopperParams& p);

// Lower-level control: one-step proportional speed tracking with asymmetric
// clipping to [-decel_max, a_max]. This is also the expert label used for
// imitation.
double speed_command_to_accel(double v, double v_cmd,
                              const FollowerStopperParams& p, double dt);

}  // namespace microsim
