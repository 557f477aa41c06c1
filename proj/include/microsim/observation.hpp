#pragma once

#include <cstdint>
#include <vector>

#include "microsim/types.hpp"

namespace microsim {

// Local observation triple of one AV: own speed, bumper-to-bumper gap and
// leader speed. When there is no leader the gap is substituted with
// ObservationSpec::no_leader_gap and the leader speed with the own speed.
struct LocalTriple {
  double v = 0.0;
  double gap = 0.0;
  double v_lead = 0.0;
};

// Observation encoding with temporal extension: the current triple plus the
// past history_n triples sampled every sample_interval_s, each divided by
// its normalization scale. history_n = 0 yields the plain current-timestep
// encoding.
struct ObservationSpec {
  int history_n = 5;
  double sample_interval_s = 2.0;
  double scale_speed = 40.0;       // m/s
  double scale_gap = 100.0;        // m
  double scale_lead_speed = 40.0;  // m/s
  double no_leader_gap = 100.0;    // m, substitute when there is no leader

  int input_dim() const { return 3 * (history_n + 1); }
  void validate() const;
};

// Per-AV ring buffer of the last history_n sampled triples. On creation the
// buffer is seeded with history_n copies of the first observed triple, so a
// freshly tagged AV encodes to identical replicated triples until real
// samples displace the padding.
class HistoryBuffer {
 public:
  HistoryBuffer(const LocalTriple& initial, std::int64_t created_step, int n);

  // Push `current` if at least `interval_steps` steps elapsed since the last
  // sample. Between samples the buffer is frozen.
  void maybe_sample(const LocalTriple& current, std::int64_t step_index,
                    std::int64_t interval_steps);

  // age 0 = most recent sample, age size()-1 = oldest.
  const LocalTriple& at_age(int age) const;
  int size() const { return static_cast<int>(entries_.size()); }

 private:
  std::vector<LocalTriple> entries_;  // ring storage
  std::size_t newest_ = 0;
  std::int64_t last_sample_step_ = 0;
};

// 3 (history_n + 1) entries: the normalized current triple followed by the
// history triples, newest first.
void encode_observation(const HistoryBuffer& buf, const LocalTriple& current,
                        const ObservationSpec& spec, std::vector<double>& out);

}  // namespace microsim
