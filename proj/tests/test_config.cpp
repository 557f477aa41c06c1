#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "microsim/config_file.hpp"

using namespace microsim;

namespace {

std::string write_temp_config(const char* name, const std::string& body) {
  const std::string path =
      (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("defaults survive an empty config") {
  const std::string path = write_temp_config("microsim_empty.cfg",
                                             "# nothing but a comment\n\n");
  const FullConfig cfg = load_config(path);
  std::filesystem::remove(path);
  CHECK(cfg.network.length_m == doctest::Approx(1609.0));
  CHECK(cfg.sim.dt == doctest::Approx(0.4));
  CHECK(cfg.idm.a == doctest::Approx(1.3));
  CHECK(cfg.fs.c == doctest::Approx(0.001));
  CHECK(cfg.obs.history_n == 5);
  CHECK(cfg.train.hidden == std::vector<int>{32, 32, 32});
  CHECK(cfg.dagger.heldout.size() == 9);
}

TEST_CASE("keys map onto every parameter bundle") {
  const std::string path = write_temp_config("microsim_full.cfg", R"(
# network
length_m = 1200
num_lanes = 3
downstream_speed_limit = 6
topology = open_highway

dt = 0.2
warmup_s = 100
horizon_s = 50
inflow_rate = 2000
penetration = 0.1
seed = 42
lc_eagerness = 2.0

idm_a = 1.5
idm_noise_std = 0.2
fs_c = 0
fs_dx1 = 4.0
obs_history_n = 0
dagger_epochs = 10
dagger_init_samples = 5000
dagger_samples_per_epoch = 1500
dagger_total_samples = 20000
dagger_seeds = 3, 5
dagger_heldout_inflows = 1925
dagger_heldout_limits = 5, 7
train_hidden = 16, 16
energy_c4 = 0.3
sweep_controllers = baseline, expert
sweep_inflows = 2000, 2100
controller = expert
)");
  const FullConfig cfg = load_config(path);
  std::filesystem::remove(path);
  CHECK(cfg.network.length_m == 1200.0);
  CHECK(cfg.network.num_lanes == 3);
  CHECK(cfg.network.downstream_speed_limit == 6.0);
  CHECK(cfg.sim.dt == 0.2);
  CHECK(cfg.sim.seed == 42);
  CHECK(cfg.sim.lc_eagerness == 2.0);
  CHECK(cfg.idm.a == 1.5);
  CHECK(cfg.fs.c == 0.0);
  CHECK(cfg.fs.dx0[0] == 4.0);
  CHECK(cfg.obs.history_n == 0);
  CHECK(cfg.obs.input_dim() == 3);
  CHECK(cfg.dagger.epochs == 10);
  CHECK(cfg.dagger.seeds == std::vector<std::uint64_t>{3, 5});
  REQUIRE(cfg.dagger.heldout.size() == 2);
  CHECK(cfg.dagger.heldout[0] == std::pair<double, double>{1925.0, 5.0});
  CHECK(cfg.dagger.heldout[1] == std::pair<double, double>{1925.0, 7.0});
  CHECK(cfg.train.hidden == std::vector<int>{16, 16});
  CHECK(cfg.energy.c4 == 0.3);
  CHECK(cfg.sweep.inflows == std::vector<double>{2000.0, 2100.0});
  CHECK(cfg.controller == "expert");
}

TEST_CASE("unknown keys are configuration errors") {
  const std::string path =
      write_temp_config("microsim_unknown.cfg", "no_such_key = 1\n");
  CHECK_THROWS_WITH_AS(load_config(path),
                       doctest::Contains("unknown config key 'no_such_key'"),
                       ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("missing files and malformed lines") {
  CHECK_THROWS_WITH_AS(load_config("/nonexistent/microsim.cfg"),
                       doctest::Contains("/nonexistent/microsim.cfg"),
                       ConfigError);
  const std::string path =
      write_temp_config("microsim_malformed.cfg", "dt 0.4\n");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::filesystem::remove(path);
  const std::string bad_value =
      write_temp_config("microsim_badvalue.cfg", "dt = fast\n");
  CHECK_THROWS_AS(load_config(bad_value), ConfigError);
  std::filesystem::remove(bad_value);
}

TEST_CASE("invalid field combinations are rejected at load time") {
  const std::string path = write_temp_config(
      "microsim_invalid.cfg", "downstream_speed_limit = 35\n");
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::filesystem::remove(path);
}
