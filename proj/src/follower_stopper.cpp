#include "microsim/follower_stopper.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace microsim {

void FollowerStopperParams::validate() const {
  if (!(dx0[0] < dx0[1] && dx0[1] < dx0[2]))
    throw ConfigError("follower stopper dx0 must satisfy dx1 < dx2 < dx3");
  if (!(d[0] > d[1] && d[1] > d[2] && d[2] > 0.0))
    throw ConfigError("follower stopper d must satisfy d1 > d2 > d3 > 0");
  if (!(a_max > 0.0)) throw ConfigError("follower stopper a_max must be > 0");
  if (c < 0.0) throw ConfigError("follower stopper c must be >= 0");
  if (!(decel_max > 0.0))
    throw ConfigError("follower stopper decel_max must be > 0");
  if (k_p < 0.0) throw ConfigError("follower stopper k_p must be >= 0");
}

double delta_x(int k, double dv, const FollowerStopperParams& p) {
  if (k < 1 || k > 3)
    throw std::invalid_argument("delta_x: k must be 1, 2 or 3");
  const double closing = std::min(dv, 0.0);
  return p.dx0[k - 1] + closing * closing / (2.0 * p.d[k - 1]);
}

double fs_command_velocity(double v_av, double gap, double v_lead, double U,
                           const FollowerStopperParams& p) {
  const double dv = v_lead - v_av;
  std::array<double, 3> bound{delta_x(1, dv, p), delta_x(2, dv, p),
                              delta_x(3, dv, p)};
  std::sort(bound.begin(), bound.end());
  const double v = std::min(std::max(v_lead, 0.0), U);
  if (gap <= bound[0]) return 0.0;
  if (gap <= bound[1]) return v * (gap - bound[0]) / (bound[1] - bound[0]);
  if (gap <= bound[2])
    return v + (U - v) * (gap - bound[1]) / (bound[2] - bound[1]);
  if (p.c != 0.0) return U + p.c * (gap - bound[2]) * (gap - bound[2]);
  return U;
}

double speed_command_to_accel(double v, double v_cmd,
                              const FollowerStopperParams& p, double dt) {
  const double kp = p.k_p > 0.0 ? p.k_p : 1.0 / dt;
  return std::clamp(kp * (v_cmd - v), -p.decel_max, p.a_max);
}

}  // namespace microsim
