// SPDX-License-Identifier: Apache-2.0
#include "demo.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <thread>

#include "gridedge/error.hpp"
#include "gridedge/pipeline.hpp"
#include "gridedge/report.hpp"
#include "gridedge/roles.hpp"
#include "gridedge/runtime.hpp"
#include "gridedge/settings.hpp"
#include "gridedge/text.hpp"

extern char** environ;

namespace gridedge::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct UePlan {
  std::string id;
  RegionId region = 0;
  fs::path script;
};

struct Plan {
  DemoKind kind = DemoKind::Topology;
  Config cfg;
  GridCase base;
  Partition partition;
  msg::RunManifest manifest;
  std::vector<RegionId> regions;
  fs::path dir, store, logs, scripts;
  std::vector<UePlan> ues;
  std::optional<BranchId> open_branch;
  RegionId withhold = 0;
  RegionId duplicate = 0;
  unsigned workers = 2;
};

std::optional<RegionId> optional_region(const Config& cfg, const std::string& key) {
  const auto v = cfg.get_string(key, "");
  if (v.empty()) return std::nullopt;
  return static_cast<RegionId>(cfg.get_int(key, 0));
}

std::optional<BusId> first_load_bus(const Plan& p, RegionId region) {
  for (BusId b : p.base.load_buses()) {
    if (p.partition.bus_region.at(b) == region) return b;
  }
  return std::nullopt;
}

Plan make_plan(DemoKind kind, const Config& cfg) {
  Plan p;
  p.kind = kind;
  p.cfg = cfg;
  const auto case_path = cfg.get_string("grid.case", "");
  if (case_path.empty()) throw Error(Errc::InvalidArgument, "grid.case is not set");
  p.base = load_case(case_path);
  p.partition = Partition::from_case(p.base);
  p.manifest = manifest_from_config(cfg);
  p.manifest.sim.omega_s = 2.0 * std::numbers::pi * p.base.freq_hz;
  p.regions.assign(p.manifest.expected_regions.begin(), p.manifest.expected_regions.end());
  for (RegionId r : p.regions) {
    if (!p.partition.regions.count(r)) throw Error(Errc::UnknownRegion, "region " + std::to_string(r) + " is not in the case");
  }
  p.workers = static_cast<unsigned>(cfg.get_uint("node.workers", 2));
  if (const auto b = cfg.get_string("demo.open_branch", ""); !b.empty() && kind == DemoKind::Topology) {
    p.open_branch = static_cast<BranchId>(text::parse_int(b));
    if (!p.base.find_branch(*p.open_branch)) throw Error(Errc::InvalidArgument, "demo.open_branch: no such branch");
  }
  p.withhold = optional_region(cfg, "demo.withhold_region").value_or(0);
  p.duplicate = optional_region(cfg, "demo.duplicate_region").value_or(0);

  p.dir = cfg.get_string("demo.dir", "demo-out");
  p.store = p.dir / "store";
  p.logs = p.dir / "logs" / p.manifest.run_id;
  p.scripts = p.dir / "scripts" / p.manifest.run_id;
  fs::remove_all(p.store / "runs" / p.manifest.run_id);
  fs::remove_all(p.logs);
  fs::remove_all(p.scripts);
  fs::create_directories(p.store);
  fs::create_directories(p.logs);
  fs::create_directories(p.scripts);

  const auto n_ues = cfg.get_int("demo.ues", 3);
  if (n_ues < 1) throw Error(Errc::InvalidArgument, "demo.ues must be at least 1");
  bool branch_assigned = false;
  for (int i = 1; i <= n_ues; ++i) {
    UePlan ue;
    ue.id = "ue-" + std::to_string(i);
    ue.region = p.regions[static_cast<std::size_t>(i - 1) % p.regions.size()];
    ue.script = p.scripts / (ue.id + ".script");
    std::string script;
    const auto bus = first_load_bus(p, ue.region);
    if (kind == DemoKind::Topology) {
      if (p.open_branch && !branch_assigned && p.partition.branch_region.at(*p.open_branch) == ue.region) {
        script = "0.5, branch, " + std::to_string(*p.open_branch) + ", open\n";
        branch_assigned = true;
      } else if (bus) {
        const auto& b = p.base.bus(*bus);
        script = "0.3, load, " + std::to_string(*bus) + ", " + text::format_double(b.p_load) + ", " +
                 text::format_double(b.q_load) + "\n";
      }
    } else if (bus) {
      const auto& e = p.manifest.dsa.error;
      script = "0.3, forecast, " + std::to_string(*bus) + ", " +
               (e.dist == ErrorDistribution::Gaussian ? "gaussian" : "uniform") + ", " + text::format_double(e.param) +
               ", " + text::format_double(e.truncation) + "\n";
    }
    std::ofstream(ue.script) << script;
    p.ues.push_back(std::move(ue));
  }
  if (p.open_branch && !branch_assigned) {
    throw Error(Errc::InvalidArgument, "no UE is placed in the region owning branch " + std::to_string(*p.open_branch) +
                                           "; raise demo.ues or list that region in run.regions");
  }
  return p;
}

// ---------------------------------------------------------------- processes

struct Child {
  std::string name;
  pid_t pid = -1;
  std::optional<int> status;
};

Child spawn(const std::string& exe, const std::string& name, const std::vector<std::string>& args,
            const fs::path& output) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, output.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, 1, 2);
  std::vector<std::string> all{exe};
  all.insert(all.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : all) argv.push_back(a.data());
  argv.push_back(nullptr);
  Child c;
  c.name = name;
  const int rc = posix_spawn(&c.pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error(Errc::Io, "cannot start " + name + ": " + std::strerror(rc));
  return c;
}

/// Exit status, or nullopt if still running after `timeout_s`.
std::optional<int> wait_child(Child& c, double timeout_s) {
  if (c.status) return c.status;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
  for (;;) {
    int status = 0;
    const pid_t r = waitpid(c.pid, &status, WNOHANG);
    if (r == c.pid) {
      c.status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      return c.status;
    }
    if (Clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void kill_child(Child& c) {
  if (c.status || c.pid <= 0) return;
  ::kill(c.pid, SIGTERM);
  if (!wait_child(c, 2.0)) {
    ::kill(c.pid, SIGKILL);
    wait_child(c, 5.0);
  }
}

int wait_port(Child& c, const fs::path& file) {
  const auto deadline = Clock::now() + std::chrono::seconds(20);
  while (Clock::now() < deadline) {
    if (fs::exists(file)) {
      std::ifstream in(file);
      int port = 0;
      if (in >> port && port > 0) return port;
    }
    if (wait_child(c, 0.0)) throw Error(Errc::Io, c.name + " exited before listening");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw Error(Errc::Timeout, c.name + " did not report its port");
}

struct ChildGuard {
  std::vector<Child>& children;
  ~ChildGuard() {
    for (auto& c : children) kill_child(c);
  }
};

int run_processes(const Plan& p, const std::string& exe) {
  const auto eff = p.dir / ("effective-" + p.manifest.run_id + ".conf");
  {
    std::ofstream out(eff);
    out << "# resolved settings for run " << p.manifest.run_id << "\n";
    for (const auto& [k, v] : p.cfg.values()) {
      if (k != "link.profile") out << k << " = " << v << "\n";
    }
  }
  const std::vector<std::string> common{"--config", eff.string(), "--store-root", p.store.string(), "--log-dir",
                                        p.logs.string()};
  auto args = [&](std::string sub, std::vector<std::string> more) {
    std::vector<std::string> a{std::move(sub)};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), more.begin(), more.end());
    return a;
  };

  std::vector<Child> servers;
  ChildGuard guard{servers};
  const auto cloud_port_file = p.logs / "cloud.port";
  servers.push_back(spawn(exe, "cloud",
                          args("cloud", {"--node-id", "cloud", "--listen", "127.0.0.1:0", "--port-file",
                                         cloud_port_file.string()}),
                          p.logs / "cloud.out"));
  const auto cloud_addr = "127.0.0.1:" + std::to_string(wait_port(servers.back(), cloud_port_file));
  std::cout << "cloud listening on " << cloud_addr << "\n";

  std::map<RegionId, std::string> edge_addr;
  std::vector<std::pair<RegionId, fs::path>> port_files;
  for (RegionId r : p.regions) {
    const auto id = "edge-" + std::to_string(r);
    const auto port_file = p.logs / (id + ".port");
    std::vector<std::string> more{"--node-id", id, "--region", std::to_string(r), "--listen", "127.0.0.1:0",
                                  "--port-file", port_file.string(), "--cloud-addr", cloud_addr};
    if (r == p.withhold) more.insert(more.end(), {"--set", "edge.fault_injection=withhold"});
    if (r == p.duplicate) more.insert(more.end(), {"--set", "edge.fault_injection=duplicate"});
    servers.push_back(spawn(exe, id, args("edge", more), p.logs / (id + ".out")));
    port_files.emplace_back(r, port_file);
  }
  for (std::size_t i = 0; i < port_files.size(); ++i) {
    const auto [r, file] = port_files[i];
    edge_addr[r] = "127.0.0.1:" + std::to_string(wait_port(servers[i + 1], file));
    std::cout << "edge-" << r << " listening on " << edge_addr[r] << "\n";
  }

  std::vector<Child> ues;
  ChildGuard ue_guard{ues};
  for (const auto& ue : p.ues) {
    ues.push_back(spawn(exe, ue.id,
                        args("ue", {"--node-id", ue.id, "--edge-addr", edge_addr.at(ue.region), "--script",
                                    ue.script.string()}),
                        p.logs / (ue.id + ".out")));
  }
  for (auto& ue : ues) {
    const auto code = wait_child(ue, 60.0);
    if (!code) {
      std::cout << ue.name << " did not finish; stopping it\n";
      kill_child(ue);
    } else if (*code != 0) {
      std::cout << ue.name << " exited with " << *code << "\n";
    }
  }

  std::vector<Child> ctl;
  ChildGuard ctl_guard{ctl};
  ctl.push_back(spawn(exe, "controller",
                      args("open", {"--node-id", "controller", "--cloud-addr", cloud_addr, "--shutdown"}),
                      p.logs / "controller.out"));
  const auto ctl_code = wait_child(ctl.back(), p.manifest.deadline_s + 600.0);
  if (!ctl_code) throw Error(Errc::Timeout, "the run controller did not finish");
  {
    std::ifstream in(p.logs / "controller.out");
    std::cout << in.rdbuf();
  }
  for (auto& s : servers) {
    const auto code = wait_child(s, 15.0);
    if (!code) {
      std::cout << s.name << " did not shut down; stopping it\n";
      kill_child(s);
    } else if (*code != 0) {
      std::cout << s.name << " exited with " << *code << "\n";
    }
  }
  return *ctl_code;
}

int run_virtual(const Plan& p, std::chrono::system_clock::time_point epoch) {
  const auto link = LinkProfile::from_config(p.cfg);
  VirtualNetwork net(link, p.logs.string(), epoch);
  CloudCoordinator cloud(CloudConfig{p.base, p.store.string(), p.workers});
  net.add("cloud", cloud, "cloud:1");
  std::vector<std::unique_ptr<EdgeServer>> edges;
  for (RegionId r : p.regions) {
    const auto injection = r == p.withhold     ? FaultInjection::Withhold
                           : r == p.duplicate ? FaultInjection::Duplicate
                                              : FaultInjection::None;
    edges.push_back(std::make_unique<EdgeServer>(EdgeConfig{r, p.base, "cloud:1", p.store.string(), injection}));
    net.add("edge-" + std::to_string(r), *edges.back(), "edge-" + std::to_string(r) + ":1");
  }
  std::vector<std::unique_ptr<UeAgent>> ues;
  for (const auto& ue : p.ues) {
    UeConfig cfg{"edge-" + std::to_string(ue.region) + ":1", load_script(ue.script.string()),
                 p.cfg.get_double("ue.ack_timeout_s", 2.0)};
    ues.push_back(std::make_unique<UeAgent>(cfg));
    net.add(ue.id, *ues.back());
  }
  net.run();
  Controller ctl("cloud:1", p.manifest, true);
  net.add("controller", ctl);
  net.run();
  const auto& out = ctl.outcome();
  if (out.result) {
    std::cout << "run " << p.manifest.run_id << ": " << to_string(out.result->summary.verdict) << "\n";
  } else if (out.error) {
    std::cout << "run " << p.manifest.run_id << " failed: " << out.error->code << ": " << out.error->text << "\n";
  }
  std::cout << "virtual time " << text::format_double(net.now()) << " s, " << net.frames_delivered()
            << " frames delivered\n";
  return net.exit_code("controller").value_or(2);
}

// ---------------------------------------------------------------- oracles

std::string monolithic_topology(const Plan& p) {
  GridCase c = p.base;
  if (p.open_branch) c.find_branch(*p.open_branch)->status = BranchStatus::Open;
  return trajectory_csv(run_transient(c, p.manifest.fault, p.manifest.sim));
}

/// Probability over all n_raw joint draws, each region drawing with its own
/// seed, scenario i joining every region's i-th draw.
double brute_force_probability(const Plan& p) {
  const auto loads = p.base.load_buses();
  std::vector<Scenario> joint(p.manifest.dsa.n_raw);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    joint[i].id = static_cast<int>(i);
    joint[i].multipliers.assign(loads.size(), 1.0);
  }
  for (RegionId r : p.regions) {
    ForecastSpec spec;
    for (BusId b : loads) {
      if (p.partition.bus_region.at(b) == r) {
        spec.load_buses.push_back(b);
        spec.errors.push_back(p.manifest.dsa.error);
      }
    }
    if (spec.load_buses.empty()) continue;
    const auto draws = draw_samples(spec, p.manifest.dsa.n_raw, region_seed(p.manifest.dsa.seed, r));
    for (std::size_t d = 0; d < spec.load_buses.size(); ++d) {
      const auto slot = static_cast<std::size_t>(std::find(loads.begin(), loads.end(), spec.load_buses[d]) - loads.begin());
      for (std::size_t i = 0; i < draws.size(); ++i) joint[i].multipliers[slot] = draws[i].multipliers[d];
    }
  }
  const std::vector<double> weights(joint.size(), 1.0 / static_cast<double>(joint.size()));
  return assess_scenarios(p.base, build_ybus(p.base), p.manifest.fault, p.manifest.sim, joint, weights, p.workers)
      .insecurity_probability;
}

}  // namespace

Config demo_defaults(DemoKind kind) {
  Config c;
#ifdef GRIDEDGE_DATA_DIR
  c.set("grid.case", std::string(GRIDEDGE_DATA_DIR) + "/fixtures/case9.txt");
#endif
  if (kind == DemoKind::Topology) {
    c.set("run.id", "topo-1");
    c.set("run.mode", "topology");
    c.set("run.fault_bus", "7");
    c.set("run.clear_branch", "");
    c.set("run.t_clear", "0.2");
  } else {
    c.set("run.id", "dsa-1");
    c.set("run.mode", "dsa");
    c.set("run.fault_bus", "7");
    c.set("run.clear_branch", "4");
    c.set("run.t_clear", "0.26");
    c.set("run.error_param", "0.05");
  }
  return c;
}

int run_demo(DemoKind kind, Config cfg, const std::string& self_exe) {
  const auto p = make_plan(kind, cfg);
  const bool virtual_time = cfg.get_bool("demo.virtual_time", false);
  const auto& run_id = p.manifest.run_id;
  std::cout << (kind == DemoKind::Topology ? "topology" : "dsa") << " demo, run " << run_id << ", "
            << p.regions.size() << " regions, " << p.ues.size() << " UEs, "
            << (virtual_time ? "virtual time" : "separate processes") << "\n";

  // Stage times are measured from this marker; virtual logs share its epoch.
  // Whole microseconds, the log resolution, so virtual offsets stay exact.
  const auto t0 = std::chrono::system_clock::time_point(
      std::chrono::floor<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch()));
  {
    EventLog harness((p.logs / "harness.log").string(), "harness", [t0] { return t0; });
    harness.write("run_start", {{"run", run_id}, {"mode", std::string(msg::to_string(p.manifest.mode))}});
  }
  int code = virtual_time ? run_virtual(p, t0) : run_processes(p, self_exe);

  bool check_ok = true;
  if (code == 0) {
    ObjectStore store(p.store);
    if (kind == DemoKind::Topology) {
      const auto reference = monolithic_topology(p);
      for (RegionId r : p.regions) {
        const auto key = store_key(run_id, r, Artifact::Result);
        const bool same = store.exists(key) && store.get(key) == reference;
        check_ok = check_ok && same;
        std::cout << "monolithic check " << key << ": " << (same ? "identical" : "DIFFERS") << "\n";
      }
    }
  }
  const auto report = build_report(run_id, p.logs.string(), p.store.string());
  if (kind == DemoKind::Dsa && report.insecurity_probability) {
    const double brute = brute_force_probability(p);
    const double diff = std::abs(*report.insecurity_probability - brute);
    std::cout << "insecurity probability: reduced " << text::format_double(*report.insecurity_probability)
              << ", brute force over " << p.manifest.dsa.n_raw << " draws " << text::format_double(brute)
              << ", difference " << text::format_double(diff) << "\n";
    check_ok = check_ok && diff <= 0.10;
  }
  std::ofstream(p.dir / (run_id + ".csv")) << report_csv(report);
  const auto summary = report_summary(report);
  std::ofstream(p.dir / (run_id + ".summary.txt")) << summary;
  std::cout << summary;
  std::cout << "report: " << (p.dir / (run_id + ".csv")).string() << "\n";
  if (code == 0 && !check_ok) {
    std::cout << "oracle check failed\n";
    return 2;
  }
  return code;
}

}  // namespace gridedge::cli
