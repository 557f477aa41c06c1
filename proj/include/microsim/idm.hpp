#pragma once

#include "microsim/types.hpp"

namespace microsim {

// Intelligent Driver Model parameters for the human car-following law.
struct IdmParams {
  double v0 = 30.0;       // desired speed, m/s
  double headway = 1.0;   // desired time headway T, s
  double a = 1.3;         // maximum acceleration, m/s^2
  double b = 2.0;         // comfortable deceleration, m/s^2
  double delta = 4.0;     // free-acceleration exponent
  double s0 = 2.0;        // minimum spacing, m
  double noise_std = 0.3; // std of the per-step additive acceleration noise

  void validate() const;
};

// Hard-braking value returned on a collision course (gap <= 0).
inline constexpr double kIdmEmergencyDecel = -9.0;

// Desired bumper-to-bumper gap s*(v, v_lead), floored at zero.
double idm_desired_gap(double v, double v_lead, const IdmParams& p);

// Car-following acceleration with additive noise, clipped to
// [kIdmEmergencyDecel, 2a]. Pass gap = +infinity and v_lead = v when there
// is no leader. gap <= 0 returns the emergency value.
double idm_accel(double v, double gap, double v_lead, const IdmParams& p,
                 double noise);

// Noise-free fixed points: the speed sustained at a given constant gap, and
// the gap sustained at a given constant speed (0 < v < v0).
double idm_equilibrium_speed(double gap, const IdmParams& p);
double idm_equilibrium_gap(double v, const IdmParams& p);

}  // namespace microsim
