#include "microsim/idm.hpp"

#include <algorithm>
#include <cmath>

namespace microsim {

void IdmParams::validate() const {
  if (!(v0 > 0.0)) throw ConfigError("idm v0 must be > 0");
  if (!(headway > 0.0)) throw ConfigError("idm headway must be > 0");
  if (!(a > 0.0)) throw ConfigError("idm a must be > 0");
  if (!(b > 0.0)) throw ConfigError("idm b must be > 0");
  if (!(delta > 0.0)) throw ConfigError("idm delta must be > 0");
  if (!(s0 > 0.0)) throw ConfigError("idm s0 must be > 0");
  if (noise_std < 0.0) throw ConfigError("idm noise_std must be >= 0");
}

double idm_desired_gap(double v, double v_lead, const IdmParams& p) {
  const double dynamic =
      v * p.headway + v * (v - v_lead) / (2.0 * std::sqrt(p.a * p.b));
  return p.s0 + std::max(0.0, dynamic);
}

double idm_accel(double v, double gap, double v_lead, const IdmParams& p,
                 double noise) {
  if (!(gap > 0.0)) return kIdmEmergencyDecel;
  const double free_term = std::pow(v / p.v0, p.delta);
  const double ratio = idm_desired_gap(v, v_lead, p) / gap;  // 0 at gap = inf
  const double accel = p.a * (1.0 - free_term - ratio * ratio) + noise;
  return std::clamp(accel, kIdmEmergencyDecel, 2.0 * p.a);
}

double idm_equilibrium_speed(double gap, const IdmParams& p) {
  // Noise-free acceleration at constant gap is strictly decreasing in v;
  // bisect for the root in [0, v0).
  auto accel_at = [&](double v) { return idm_accel(v, gap, v, p, 0.0); };
  double lo = 0.0;
  double hi = p.v0 * (1.0 - 1e-12);
  if (accel_at(lo) <= 0.0) return 0.0;  // gap at or below standstill spacing
  if (accel_at(hi) >= 0.0) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (accel_at(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double idm_equilibrium_gap(double v, const IdmParams& p) {
  return idm_desired_gap(v, v, p) /
         std::sqrt(1.0 - std::pow(v / p.v0, p.delta));
}

}  // namespace microsim
