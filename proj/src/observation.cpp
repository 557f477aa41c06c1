#include "microsim/observation.hpp"

#include <stdexcept>

namespace microsim {

void ObservationSpec::validate() const {
  if (history_n < 0) throw ConfigError("obs history_n must be >= 0");
  if (!(sample_interval_s > 0.0))
    throw ConfigError("obs sample_interval_s must be > 0");
  if (!(scale_speed > 0.0 && scale_gap > 0.0 && scale_lead_speed > 0.0))
    throw ConfigError("obs normalization scales must be > 0");
  if (!(no_leader_gap > 0.0)) throw ConfigError("obs no_leader_gap must be > 0");
}

HistoryBuffer::HistoryBuffer(const LocalTriple& initial,
                             std::int64_t created_step, int n)
    : entries_(static_cast<std::size_t>(n < 0 ? 0 : n), initial),
      last_sample_step_(created_step) {}

void HistoryBuffer::maybe_sample(const LocalTriple& current,
                                 std::int64_t step_index,
                                 std::int64_t interval_steps) {
  if (entries_.empty()) return;
  if (step_index - last_sample_step_ < interval_steps) return;
  newest_ = (newest_ + entries_.size() - 1) % entries_.size();
  entries_[newest_] = current;
  last_sample_step_ = step_index;
}

const LocalTriple& HistoryBuffer::at_age(int age) const {
  if (age < 0 || age >= size())
    throw std::out_of_range("HistoryBuffer::at_age");
  return entries_[(newest_ + static_cast<std::size_t>(age)) % entries_.size()];
}

void encode_observation(const HistoryBuffer& buf, const LocalTriple& current,
                        const ObservationSpec& spec,
                        std::vector<double>& out) {
  if (buf.size() != spec.history_n)
    throw std::invalid_argument("encode_observation: buffer size mismatch");
  out.resize(static_cast<std::size_t>(spec.input_dim()));
  std::size_t k = 0;
  auto put = [&](const LocalTriple& t) {
    out[k++] = t.v / spec.scale_speed;
    out[k++] = t.gap / spec.scale_gap;
    out[k++] = t.v_lead / spec.scale_lead_speed;
  };
  put(current);
  for (int age = 0; age < spec.history_n; ++age) put(buf.at_age(age));
}

}  // namespace microsim
