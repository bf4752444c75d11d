// SPDX-License-Identifier: Apache-2.0
//
// gridedge: node processes, demos and offline tools.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "demo.hpp"
#include "gridedge/error.hpp"
#include "gridedge/pipeline.hpp"
#include "gridedge/report.hpp"
#include "gridedge/roles.hpp"
#include "gridedge/runtime.hpp"
#include "gridedge/settings.hpp"
#include "gridedge/text.hpp"

namespace fs = std::filesystem;
using namespace gridedge;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

/// Flags shared by the node, demo and report commands. Each maps onto one or
/// more config keys (see known_keys()).
struct SharedFlags {
  std::optional<std::string> config;
  std::map<std::string, std::string> values;  // flag -> value
  std::vector<std::string> sets;              // --set key=value
  bool virtual_time = false;
  std::string port_file;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "Config file (section.key = value)");
    std::set<std::string> seen;
    for (const auto& k : known_keys()) {
      const std::string flag(k.flag);
      if (flag.empty() || !seen.insert(flag).second) continue;
      if (flag == "--virtual-time") {
        app.add_flag(flag, virtual_time, std::string(k.help));
      } else {
        app.add_option(flag, values[flag], std::string(k.help));
      }
    }
    app.add_option("--set", sets, "Override any key: --set section.key=value")->take_all();
    app.add_option("--port-file", port_file, "Write the bound port here")->group("");
  }

  Config resolve(const Config& preset = {}) const {
    Config flags;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "--set expects key=value, got `" + s + "`");
      flags.set(std::string(text::trim(s.substr(0, eq))), std::string(text::trim(s.substr(eq + 1))));
    }
    for (const auto& k : known_keys()) {
      const std::string flag(k.flag);
      if (flag.empty()) continue;
      if (flag == "--virtual-time") {
        if (virtual_time) flags.set(std::string(k.key), "true");
        continue;
      }
      const auto it = values.find(flag);
      if (it != values.end() && !it->second.empty()) flags.set(std::string(k.key), it->second);
    }
    return resolve_config(config, flags, preset);
  }
};

std::string require(const Config& cfg, const std::string& key) {
  const auto v = cfg.get_string(key, "");
  if (v.empty()) throw Error(Errc::InvalidArgument, key + " is required (config key or its flag)");
  return v;
}

HostOptions host_options(const Config& cfg, const std::string& fallback_id) {
  HostOptions o;
  o.node_id = cfg.get_string("node.id", "");
  if (o.node_id.empty()) o.node_id = fallback_id;
  o.link = LinkProfile::from_config(cfg);
  o.log_path = (fs::path(cfg.get_string("log.dir", "logs")) / (o.node_id + ".log")).string();
  o.workers = static_cast<unsigned>(cfg.get_uint("node.workers", 2));
  return o;
}

void write_port(const std::string& file, int port) {
  if (file.empty()) return;
  const auto tmp = file + ".tmp";
  std::ofstream(tmp) << port << "\n";
  fs::rename(tmp, file);
}

int run_ue(const Config& cfg) {
  UeConfig ue;
  ue.edge_addr = require(cfg, "ue.edge_addr");
  if (const auto s = cfg.get_string("ue.script", ""); !s.empty()) ue.script = load_script(s);
  ue.ack_timeout_s = cfg.get_double("ue.ack_timeout_s", 2.0);
  LiveHost host(host_options(cfg, "ue"));
  UeAgent agent(ue);
  const int code = host.run(agent);
  const auto& r = agent.report();
  std::cout << host.node_id() << ": delivered=" << r.delivered << " rejected=" << r.rejected
            << " failed=" << r.failed;
  if (!r.error.empty()) std::cout << " error=\"" << r.error << "\"";
  std::cout << "\n";
  return code;
}

int run_edge(const Config& cfg, const std::string& port_file) {
  EdgeConfig e;
  e.region = static_cast<RegionId>(text::parse_int(require(cfg, "edge.region")));
  e.base_case = load_case(require(cfg, "grid.case"));
  e.cloud_addr = require(cfg, "edge.cloud_addr");
  e.store_root = cfg.get_string("store.root", "store");
  e.fault_injection = parse_fault_injection(cfg.get_string("edge.fault_injection", "none"));
  LiveHost host(host_options(cfg, "edge-" + std::to_string(e.region)));
  EdgeServer edge(std::move(e));
  write_port(port_file, host.listen(require(cfg, "node.listen")));
  return host.run(edge);
}

int run_cloud(const Config& cfg, const std::string& port_file) {
  CloudConfig c;
  c.base_case = load_case(require(cfg, "grid.case"));
  c.store_root = cfg.get_string("store.root", "store");
  c.workers = static_cast<unsigned>(cfg.get_uint("node.workers", 2));
  LiveHost host(host_options(cfg, "cloud"));
  CloudCoordinator cloud(std::move(c));
  write_port(port_file, host.listen(require(cfg, "node.listen")));
  return host.run(cloud);
}

int run_open(const Config& cfg, bool shutdown) {
  auto manifest = manifest_from_config(cfg);
  if (const auto c = cfg.get_string("grid.case", ""); !c.empty()) {
    manifest.sim.omega_s = 2.0 * std::numbers::pi * load_case(c).freq_hz;
  }
  LiveHost host(host_options(cfg, "controller"));
  Controller ctl(require(cfg, "edge.cloud_addr"), manifest, shutdown);
  const int code = host.run(ctl);
  const auto& out = ctl.outcome();
  if (out.result) {
    const auto& s = out.result->summary;
    std::cout << "run " << manifest.run_id << ": " << to_string(s.verdict);
    if (s.t_unstable) std::cout << " t_unstable=" << text::format_double(*s.t_unstable);
    if (s.insecurity_probability) {
      std::cout << " insecurity_probability=" << text::format_double(*s.insecurity_probability)
                << " scenarios=" << s.n_scenarios;
    }
    std::cout << " result=" << out.result->store_key << "\n";
  } else if (out.error) {
    std::cout << "run " << manifest.run_id << " failed: " << out.error->code << ": " << out.error->text;
    if (!out.error->missing_regions.empty()) {
      std::cout << " missing_regions=";
      for (std::size_t i = 0; i < out.error->missing_regions.size(); ++i) {
        std::cout << (i ? "," : "") << out.error->missing_regions[i];
      }
    }
    std::cout << "\n";
  }
  return code;
}

FaultSpec parse_fault(const std::string& spec) {
  FaultSpec f;
  bool have_bus = false, have_clear = false;
  for (const auto& part : text::split(spec, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "fault: expected key=value, got `" + part + "`");
    const auto key = std::string(text::trim(part.substr(0, eq)));
    const auto value = std::string(text::trim(part.substr(eq + 1)));
    if (key == "bus") {
      f.faulted_bus = static_cast<BusId>(text::parse_int(value));
      have_bus = true;
    } else if (key == "branch") {
      f.cleared_branch = static_cast<BranchId>(text::parse_int(value));
    } else if (key == "t_fault") {
      f.t_fault = text::parse_double(value);
    } else if (key == "t_clear") {
      f.t_clear = text::parse_double(value);
      have_clear = true;
    } else {
      throw Error(Errc::InvalidArgument, "fault: unknown key `" + key + "` (bus, branch, t_fault, t_clear)");
    }
  }
  if (!have_bus || !have_clear) throw Error(Errc::InvalidArgument, "fault needs at least bus= and t_clear=");
  return f;
}

int cmd_ybus(const std::string& path) {
  const auto c = load_case(path);
  const auto y = build_ybus(c);
  std::cout << "row_bus,col_bus,g,b\n";
  for (const auto& [key, v] : y.entries) {
    std::cout << y.bus_ids[static_cast<std::size_t>(key.first)] << "," << y.bus_ids[static_cast<std::size_t>(key.second)]
              << "," << text::format_double(v.real()) << "," << text::format_double(v.imag()) << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& path, const std::string& fault_text, double t_end, double dt,
                 const std::string& out) {
  const auto c = load_case(path);
  auto cfg = SimulationConfig::for_case(c, t_end);
  cfg.dt = dt;
  const auto fault = parse_fault(fault_text);
  const auto result = run_transient(c, fault, cfg);
  const auto csv = trajectory_csv(result);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(out) << csv;
  }
  std::cerr << "verdict: " << to_string(result.verdict);
  if (result.t_unstable) std::cerr << " at t=" << text::format_double(*result.t_unstable) << " s";
  std::cerr << "\n";
  return 0;
}

int cmd_sample(const std::string& path, std::size_t n_raw, std::size_t k, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  ForecastSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() < 3 || f.size() > 4) {
      throw Error(Errc::InvalidArgument, path + ":" + std::to_string(line_no) + ": expected `bus, dist, param[, truncation]`");
    }
    ErrorModel m;
    if (f[1] == "gaussian") m.dist = ErrorDistribution::Gaussian;
    else if (f[1] == "uniform") m.dist = ErrorDistribution::Uniform;
    else throw Error(Errc::InvalidArgument, path + ":" + std::to_string(line_no) + ": dist must be gaussian or uniform");
    m.param = text::parse_double(f[2]);
    if (f.size() == 4) m.truncation = text::parse_double(f[3]);
    spec.load_buses.push_back(static_cast<BusId>(text::parse_int(f[0])));
    spec.errors.push_back(m);
  }
  spec.validate();
  const auto samples = draw_samples(spec, n_raw, seed);
  const auto set = reduce_scenarios(samples, std::min(k, n_raw), seed);
  std::cout << "id,weight";
  for (BusId b : spec.load_buses) std::cout << ",m_" << b;
  std::cout << "\n";
  for (std::size_t i = 0; i < set.representatives.size(); ++i) {
    std::cout << set.representatives[i].id << "," << text::format_double(set.weights[i]);
    for (double m : set.representatives[i].multipliers) std::cout << "," << text::format_double(m);
    std::cout << "\n";
  }
  return 0;
}

int cmd_report(const Config& cfg, const std::string& run_id, const std::string& log_dir, const std::string& csv_out) {
  const auto dir = log_dir.empty() ? (fs::path(cfg.get_string("log.dir", "logs")) / run_id).string() : log_dir;
  const auto rep = build_report(run_id, dir, cfg.get_string("store.root", "store"));
  if (csv_out.empty()) {
    std::cout << report_csv(rep);
    std::cerr << report_summary(rep);
  } else {
    std::ofstream(csv_out) << report_csv(rep);
    std::cout << report_summary(rep);
  }
  return 0;
}

std::string self_exe(const char* argv0) {
  std::error_code ec;
  const auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::absolute(argv0).string() : p.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridedge: edge/cloud grid simulation nodes, demos and tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SharedFlags ue_flags, edge_flags, cloud_flags, open_flags, demo_flags, report_flags;
  auto* ue = app.add_subcommand("ue", "Run a UE agent that plays a report script to its edge");
  ue_flags.attach(*ue);
  auto* edge = app.add_subcommand("edge", "Run an edge server for one region");
  edge_flags.attach(*edge);
  auto* cloud = app.add_subcommand("cloud", "Run the cloud coordinator");
  cloud_flags.attach(*cloud);
  auto* open = app.add_subcommand("open", "Open a run on the cloud and wait for its result");
  open_flags.attach(*open);
  bool shutdown = false;
  open->add_flag("--shutdown", shutdown, "Ask every node to exit once the run ends");

  auto* demo = app.add_subcommand("demo", "Run a complete demo on this host");
  demo->require_subcommand(1);
  auto* demo_topology = demo->add_subcommand("topology", "1 cloud, 3 edges, UEs, one scripted branch opening");
  auto* demo_dsa = demo->add_subcommand("dsa", "Forecast-uncertainty security assessment, n_raw=200, k=10");
  demo_flags.attach(*demo_topology);
  SharedFlags dsa_flags;
  dsa_flags.attach(*demo_dsa);

  std::string case_path;
  auto* ybus = app.add_subcommand("ybus", "Print the Y-bus of a case as CSV");
  ybus->add_option("case", case_path, "Case file")->required();

  std::string fault_text, sim_out;
  double t_end = 5.0, dt = 0.005;
  auto* simulate = app.add_subcommand("simulate", "Run one transient and print the trajectory CSV");
  simulate->add_option("case", case_path, "Case file")->required();
  simulate->add_option("fault", fault_text, "bus=<id>,t_clear=<s>[,t_fault=<s>][,branch=<id>]")->required();
  simulate->add_option("--t-end", t_end, "Simulated horizon, s")->capture_default_str();
  simulate->add_option("--dt", dt, "Integration step, s")->capture_default_str();
  simulate->add_option("--out", sim_out, "Write the CSV here instead of stdout");

  std::string spec_path;
  std::size_t n_raw = 200, k = 10;
  std::uint64_t seed = 1;
  auto* sample = app.add_subcommand("sample", "Draw and reduce forecast scenarios");
  sample->add_option("spec", spec_path, "Lines of `bus, gaussian|uniform, param[, truncation]`")->required();
  sample->add_option("--n-raw", n_raw, "Raw draws")->capture_default_str();
  sample->add_option("--k", k, "Representatives")->capture_default_str();
  sample->add_option("--seed", seed, "Sampling seed")->capture_default_str();

  std::string run_id, log_dir, csv_out;
  auto* report = app.add_subcommand("report", "Stage timings and verdict of a run as CSV");
  report->add_option("run_id", run_id, "Run id")->required();
  report->add_option("--logs", log_dir, "Log directory (default <log.dir>/<run_id>)");
  report->add_option("--csv", csv_out, "Write the CSV here and print the summary on stdout");
  report_flags.attach(*report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*ue) return run_ue(ue_flags.resolve());
    if (*edge) return run_edge(edge_flags.resolve(), edge_flags.port_file);
    if (*cloud) return run_cloud(cloud_flags.resolve(), cloud_flags.port_file);
    if (*open) return run_open(open_flags.resolve(), shutdown);
    if (*demo_topology) {
      return cli::run_demo(cli::DemoKind::Topology, demo_flags.resolve(cli::demo_defaults(cli::DemoKind::Topology)),
                           self_exe(argv[0]));
    }
    if (*demo_dsa) {
      return cli::run_demo(cli::DemoKind::Dsa, dsa_flags.resolve(cli::demo_defaults(cli::DemoKind::Dsa)),
                           self_exe(argv[0]));
    }
    if (*ybus) return cmd_ybus(case_path);
    if (*simulate) return cmd_simulate(case_path, fault_text, t_end, dt, sim_out);
    if (*sample) return cmd_sample(spec_path, n_raw, k, seed);
    if (*report) return cmd_report(report_flags.resolve(), run_id, log_dir, csv_out);
  } catch (const Error& e) {
    std::cerr << "gridedge: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "gridedge: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
