#include "microsim/config_file.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

namespace microsim {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': cannot parse number '" +
                      value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      value + "'");
  return i;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* begin = value.data();
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("config key '" + key +
                      "': cannot parse unsigned integer '" + value + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  for (char c : value) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value))
    out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& key,
                                const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split_list(value))
    out.push_back(parse_int(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& key,
                                          const std::string& value) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(value))
    out.push_back(parse_u64(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Held-out pairs are the cross product of the two lists.
std::vector<std::pair<double, double>> cross(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  std::vector<std::pair<double, double>> out;
  for (double x : a)
    for (double y : b) out.emplace_back(x, y);
  return out;
}

}  // namespace

void apply_config_entry(FullConfig& cfg, const std::string& key,
                        const std::string& value) {
  auto d = [&] { return parse_double(key, value); };
  auto i = [&] { return parse_int(key, value); };

  if (key == "length_m") cfg.network.length_m = d();
  else if (key == "num_lanes") cfg.network.num_lanes = i();
  else if (key == "speed_limit_zone_length_m")
    cfg.network.speed_limit_zone_length_m = d();
  else if (key == "downstream_speed_limit")
    cfg.network.downstream_speed_limit = d();
  else if (key == "mainline_speed_limit") cfg.network.mainline_speed_limit = d();
  else if (key == "topology") {
    if (value == "open_highway") cfg.network.topology = Topology::open_highway;
    else if (value == "ring") cfg.network.topology = Topology::ring;
    else throw ConfigError("config key 'topology': unknown value '" + value + "'");
  }
  else if (key == "dt") cfg.sim.dt = d();
  else if (key == "warmup_s") cfg.sim.warmup_s = d();
  else if (key == "horizon_s") cfg.sim.horizon_s = d();
  else if (key == "inflow_rate") cfg.sim.inflow_rate = d();
  else if (key == "penetration") cfg.sim.penetration = d();
  else if (key == "seed") cfg.sim.seed = parse_u64(key, value);
  else if (key == "lc_eagerness") cfg.sim.lc_eagerness = d();
  else if (key == "ring_vehicles") cfg.sim.ring_vehicles = i();
  else if (key == "idm_v0") cfg.idm.v0 = d();
  else if (key == "idm_headway") cfg.idm.headway = d();
  else if (key == "idm_a") cfg.idm.a = d();
  else if (key == "idm_b") cfg.idm.b = d();
  else if (key == "idm_delta") cfg.idm.delta = d();
  else if (key == "idm_s0") cfg.idm.s0 = d();
  else if (key == "idm_noise_std") cfg.idm.noise_std = d();
  else if (key == "fs_dx1") cfg.fs.dx0[0] = d();
  else if (key == "fs_dx2") cfg.fs.dx0[1] = d();
  else if (key == "fs_dx3") cfg.fs.dx0[2] = d();
  else if (key == "fs_d1") cfg.fs.d[0] = d();
  else if (key == "fs_d2") cfg.fs.d[1] = d();
  else if (key == "fs_d3") cfg.fs.d[2] = d();
  else if (key == "fs_a_max") cfg.fs.a_max = d();
  else if (key == "fs_c") cfg.fs.c = d();
  else if (key == "fs_decel_max") cfg.fs.decel_max = d();
  else if (key == "fs_k_p") cfg.fs.k_p = d();
  else if (key == "obs_history_n") cfg.obs.history_n = i();
  else if (key == "obs_sample_interval_s") cfg.obs.sample_interval_s = d();
  else if (key == "obs_scale_speed") cfg.obs.scale_speed = d();
  else if (key == "obs_scale_gap") cfg.obs.scale_gap = d();
  else if (key == "obs_scale_lead_speed") cfg.obs.scale_lead_speed = d();
  else if (key == "obs_no_leader_gap") cfg.obs.no_leader_gap = d();
  else if (key == "dagger_init_rollouts") cfg.dagger.init_rollouts = i();
  else if (key == "dagger_init_samples") cfg.dagger.init_samples = i();
  else if (key == "dagger_samples_per_epoch")
    cfg.dagger.samples_per_epoch = i();
  else if (key == "dagger_epochs") cfg.dagger.epochs = i();
  else if (key == "dagger_total_samples") cfg.dagger.total_samples_target = i();
  else if (key == "dagger_inflow_grid")
    cfg.dagger.inflow_grid = parse_double_list(key, value);
  else if (key == "dagger_limit_grid")
    cfg.dagger.limit_grid = parse_double_list(key, value);
  else if (key == "dagger_heldout_inflows")
    cfg.heldout_inflows = parse_double_list(key, value);
  else if (key == "dagger_heldout_limits")
    cfg.heldout_limits = parse_double_list(key, value);
  else if (key == "dagger_eval_every") cfg.dagger.eval_every = i();
  else if (key == "dagger_seeds") cfg.dagger.seeds = parse_u64_list(key, value);
  else if (key == "train_hidden") cfg.train.hidden = parse_int_list(key, value);
  else if (key == "train_dropout") cfg.train.dropout = d();
  else if (key == "train_lr") cfg.train.lr = d();
  else if (key == "train_beta1") cfg.train.beta1 = d();
  else if (key == "train_beta2") cfg.train.beta2 = d();
  else if (key == "train_eps") cfg.train.eps = d();
  else if (key == "train_batch_size") cfg.train.batch_size = i();
  else if (key == "energy_idle_rate") cfg.energy.idle_rate = d();
  else if (key == "energy_c0") cfg.energy.c0 = d();
  else if (key == "energy_c1") cfg.energy.c1 = d();
  else if (key == "energy_c2") cfg.energy.c2 = d();
  else if (key == "energy_c3") cfg.energy.c3 = d();
  else if (key == "energy_c4") cfg.energy.c4 = d();
  else if (key == "sweep_inflows") cfg.sweep.inflows = parse_double_list(key, value);
  else if (key == "sweep_limits") cfg.sweep.limits = parse_double_list(key, value);
  else if (key == "sweep_penetrations")
    cfg.sweep.penetrations = parse_double_list(key, value);
  else if (key == "sweep_idm_a") cfg.sweep.idm_a = parse_double_list(key, value);
  else if (key == "sweep_lc_eagerness")
    cfg.sweep.lc_eagerness = parse_double_list(key, value);
  else if (key == "sweep_seeds") cfg.sweep.seeds = parse_u64_list(key, value);
  else if (key == "sweep_controllers")
    cfg.sweep.controllers = split_list(value);
  else if (key == "sweep_workers") cfg.sweep.workers = i();
  else if (key == "checkpoint_current") cfg.sweep.checkpoint_current = value;
  else if (key == "checkpoint_history") cfg.sweep.checkpoint_history = value;
  else if (key == "controller") cfg.controller = value;
  else if (key == "checkpoint") cfg.checkpoint = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

void FullConfig::validate() const {
  network.validate();
  sim.validate();
  idm.validate();
  fs.validate();
  obs.validate();
  train.validate();
  energy.validate();
  if (controller != "baseline" && controller != "expert" &&
      controller != "imitated")
    throw ConfigError("config key 'controller': unknown value '" + controller +
                      "'");
}

FullConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  FullConfig cfg;
  cfg.dagger = DaggerConfig::paper_scale();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    apply_config_entry(cfg, key, value);
  }
  cfg.dagger.heldout = cross(cfg.heldout_inflows, cfg.heldout_limits);
  cfg.validate();
  return cfg;
}

}  // namespace microsim
