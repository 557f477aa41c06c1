#pragma once

#include <string>
#include <vector>

#include "microsim/imitation.hpp"
#include "microsim/metrics.hpp"
#include "microsim/sweep.hpp"

namespace microsim {

// Everything the CLI can run, assembled from a flat `key = value` config
// file. Every field of NetworkSpec, SimConfig, IdmParams,
// FollowerStopperParams, ObservationSpec, DaggerConfig, PolicyTrainParams,
// EnergyModelParams and SweepSpec maps to a key (see README for the table).
// Unknown keys are configuration errors.
struct FullConfig {
  NetworkSpec network;
  SimConfig sim;
  IdmParams idm;
  FollowerStopperParams fs;
  ObservationSpec obs;
  DaggerConfig dagger = DaggerConfig::paper_scale();
  PolicyTrainParams train;
  EnergyModelParams energy;
  SweepSpec sweep;
  std::string controller = "baseline";  // baseline|expert|imitated
  std::string checkpoint;               // simulate/evaluate with `imitated`
  // Held-out boundary conditions as a cross product; folded into
  // dagger.heldout when the config is loaded.
  std::vector<double> heldout_inflows{1925, 2125, 2275};
  std::vector<double> heldout_limits{5, 6, 7};

  ScenarioTemplate scenario() const {
    return {network, sim, idm, fs, obs};
  }
  void validate() const;
};

FullConfig load_config(const std::string& path);

// Applies one key/value pair; throws ConfigError on unknown keys or
// unparseable values.
void apply_config_entry(FullConfig& cfg, const std::string& key,
                        const std::string& value);

}  // namespace microsim
