// SPDX-License-Identifier: Apache-2.0
#include "gridedge/settings.hpp"

#include <array>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace {

constexpr std::array kKeys = {
    KeySpec{"node.id", "", "--node-id", "Node id used in frames and log lines."},
    KeySpec{"node.listen", "", "--listen", "host:port to accept connections on (edge, cloud). Port 0 picks one."},
    KeySpec{"node.workers", "2", "", "Worker threads for edge compute and cloud scenario runs."},
    KeySpec{"grid.case", "", "--case", "Base case file."},
    KeySpec{"store.root", "store", "--store-root", "Object store directory."},
    KeySpec{"log.dir", "logs", "--log-dir", "Directory for <node_id>.log files."},
    KeySpec{"link.profile", "", "--profile", "Link profile file (link.* keys) layered over the config file."},
    KeySpec{"link.delay_min_ms", "7.5", "", "Lower bound of the one-way base delay."},
    KeySpec{"link.delay_max_ms", "18.5", "", "Upper bound of the one-way base delay."},
    KeySpec{"link.jitter_mean_ms", "5", "", "Mean of the exponential jitter before truncation."},
    KeySpec{"link.jitter_cap_ms", "18.31", "", "Jitter truncation point."},
    KeySpec{"link.bw_up_mbps", "52.43", "", "Uplink rate (dialing side to listening side). `inf` disables."},
    KeySpec{"link.bw_down_mbps", "306.01", "", "Downlink rate. `inf` disables."},
    KeySpec{"link.loss", "0", "", "Frame loss probability in [0, 1)."},
    KeySpec{"link.seed", "1", "--seed", "Seed of the link draws."},
    KeySpec{"ue.edge_addr", "", "--edge-addr", "Edge address the UE connects to."},
    KeySpec{"ue.script", "", "--script", "UE report script."},
    KeySpec{"ue.ack_timeout_s", "2", "", "Seconds to wait for an Ack before the single retry."},
    KeySpec{"edge.region", "", "--region", "Region the edge serves."},
    KeySpec{"edge.cloud_addr", "", "--cloud-addr", "Cloud address the edge (and run controller) connects to."},
    KeySpec{"edge.fault_injection", "none", "", "none, withhold (compute but never upload) or duplicate (upload twice)."},
    KeySpec{"run.id", "run-1", "--run-id", "Run id, 1-16 characters from [A-Za-z0-9_-]."},
    KeySpec{"run.mode", "topology", "", "topology or dsa."},
    KeySpec{"run.regions", "1,2,3", "", "Comma-separated regions the barrier waits for."},
    KeySpec{"run.fault_bus", "7", "", "Faulted bus."},
    KeySpec{"run.clear_branch", "", "", "Branch opened when the fault clears; empty for none."},
    KeySpec{"run.t_fault", "0.1", "", "Fault time, s."},
    KeySpec{"run.t_clear", "0.2", "", "Clearing time, s."},
    KeySpec{"run.t_end", "3", "", "Simulated horizon, s."},
    KeySpec{"run.dt", "0.005", "", "Integration step, s."},
    KeySpec{"run.deadline_s", "30", "--deadline-s", "Barrier deadline, s."},
    KeySpec{"run.n_raw", "200", "", "DSA: raw forecast draws per region."},
    KeySpec{"run.k", "10", "", "DSA: representatives kept per region."},
    KeySpec{"run.seed", "1", "--seed", "DSA: sampling seed."},
    KeySpec{"run.error_dist", "gaussian", "", "DSA: default load error distribution, gaussian or uniform."},
    KeySpec{"run.error_param", "0.05", "", "DSA: sigma (gaussian) or half width (uniform)."},
    KeySpec{"run.error_truncation", "3", "", "DSA: gaussian truncation in sigmas."},
    KeySpec{"demo.ues", "3", "", "UE processes per demo."},
    KeySpec{"demo.virtual_time", "false", "--virtual-time", "Run a demo in one process on a simulated clock."},
    KeySpec{"demo.dir", "demo-out", "--out", "Demo working directory (store, logs, reports)."},
    KeySpec{"demo.open_branch", "6", "", "Topology demo: branch a UE of its owning region opens at t = 0.5 s; empty for none."},
    KeySpec{"demo.withhold_region", "", "", "Region whose edge computes but never uploads (barrier test)."},
    KeySpec{"demo.duplicate_region", "", "", "Region whose edge uploads twice (duplicate test)."},
};

bool is_known(const std::string& key) {
  for (const auto& k : kKeys) {
    if (k.key == key) return true;
  }
  return false;
}

void check_known(const Config& cfg, const std::string& origin) {
  for (const auto& [key, value] : cfg.values()) {
    if (!is_known(key)) throw Error(Errc::InvalidArgument, origin + ": unknown key `" + key + "`");
  }
}

}  // namespace

std::span<const KeySpec> known_keys() { return kKeys; }

Config resolve_config(const std::optional<std::string>& config_path, const Config& flags, const Config& preset) {
  Config out;
  for (const auto& k : kKeys) {
    if (!k.fallback.empty()) out.set(std::string(k.key), std::string(k.fallback));
  }
  check_known(preset, "preset");
  out.merge(preset);
  Config file;
  if (config_path) {
    file = Config::load(*config_path);
    check_known(file, *config_path);
  }
  check_known(flags, "command line");
  out.merge(file);
  const auto profile = flags.find("link.profile") ? flags.find("link.profile") : file.find("link.profile");
  if (profile && !profile->empty()) {
    const auto p = Config::load(*profile);
    for (const auto& [key, value] : p.values()) {
      if (key.rfind("link.", 0) != 0 || key == "link.profile" || !is_known(key)) {
        throw Error(Errc::InvalidArgument, *profile + ": profiles may only set link.* keys, got `" + key + "`");
      }
    }
    out.merge(p);
  }
  out.merge(flags);
  return out;
}

std::set<RegionId> parse_region_list(std::string_view list) {
  std::set<RegionId> out;
  for (const auto& part : text::split(list, ',')) {
    if (part.empty()) continue;
    out.insert(static_cast<RegionId>(text::parse_int(part)));
  }
  return out;
}

msg::RunManifest manifest_from_config(const Config& cfg) {
  msg::RunManifest m;
  m.run_id = cfg.get_string("run.id", "run-1");
  const auto mode = cfg.get_string("run.mode", "topology");
  if (mode == "topology") m.mode = msg::RunMode::Topology;
  else if (mode == "dsa") m.mode = msg::RunMode::Dsa;
  else throw Error(Errc::InvalidArgument, "run.mode must be topology or dsa, got `" + mode + "`");
  m.expected_regions = parse_region_list(cfg.get_string("run.regions", "1,2,3"));
  m.fault.faulted_bus = static_cast<BusId>(cfg.get_int("run.fault_bus", 7));
  if (const auto b = cfg.find("run.clear_branch"); b && !b->empty()) {
    m.fault.cleared_branch = static_cast<BranchId>(cfg.get_int("run.clear_branch", 0));
  }
  m.fault.t_fault = cfg.get_double("run.t_fault", 0.1);
  m.fault.t_clear = cfg.get_double("run.t_clear", 0.2);
  m.sim.t_end = cfg.get_double("run.t_end", 3.0);
  m.sim.dt = cfg.get_double("run.dt", 0.005);
  m.deadline_s = cfg.get_double("run.deadline_s", 30.0);
  m.dsa.n_raw = cfg.get_uint("run.n_raw", 200);
  m.dsa.k = cfg.get_uint("run.k", 10);
  m.dsa.seed = cfg.get_uint("run.seed", 1);
  const auto dist = cfg.get_string("run.error_dist", "gaussian");
  if (dist == "gaussian") m.dsa.error.dist = ErrorDistribution::Gaussian;
  else if (dist == "uniform") m.dsa.error.dist = ErrorDistribution::Uniform;
  else throw Error(Errc::InvalidArgument, "run.error_dist must be gaussian or uniform");
  m.dsa.error.param = cfg.get_double("run.error_param", 0.05);
  m.dsa.error.truncation = cfg.get_double("run.error_truncation", 3.0);
  m.validate();
  return m;
}

}  // namespace gridedge
