// SPDX-License-Identifier: Apache-2.0
//
// UE agent, edge server, cloud coordinator and run controller.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridedge/messages.hpp"
#include "gridedge/node.hpp"
#include "gridedge/store.hpp"

namespace gridedge {

// ---- UE ----

/// One timed report. Lines of a script file look like
///   0.5, branch, 7, open
///   0.6, load, 5, 1.25, 0.5
///   0.7, forecast, 5, gaussian, 0.08
struct ScriptItem {
  double t = 0.0;
  std::optional<msg::BranchDelta> branch;
  std::optional<msg::LoadDelta> load;
  std::optional<msg::ForecastDelta> forecast;
};

std::vector<ScriptItem> parse_script(const std::string& text);
std::vector<ScriptItem> load_script(const std::string& path);

struct UeConfig {
  std::string edge_addr;
  std::vector<ScriptItem> script;
  double ack_timeout_s = 2.0;
};

struct UeReport {
  bool connected = false;
  std::string error;
  int delivered = 0;
  int rejected = 0;
  int failed = 0;
};

class UeAgent : public Node {
 public:
  explicit UeAgent(UeConfig cfg) : cfg_(std::move(cfg)) {}
  void start(NodeHost& host) override;
  void on_message(PeerId from, const wire::Envelope& env) override;
  void on_disconnect(PeerId peer) override;
  const UeReport& report() const { return report_; }

 private:
  struct Pending {
    wire::Envelope envelope;
    int attempts = 0;
    TimerId timer = 0;
  };
  void send_item(std::size_t index);
  void transmit(std::uint64_t seq);
  void on_timeout(std::uint64_t seq);
  void settle(std::uint64_t seq);
  void maybe_finish();

  UeConfig cfg_;
  NodeHost* host_ = nullptr;
  PeerId edge_ = -1;
  bool hello_acked_ = false;
  std::size_t sent_ = 0;
  std::map<std::uint64_t, Pending> pending_;
  UeReport report_;
};

// ---- edge ----

enum class FaultInjection { None, Withhold, Duplicate };
FaultInjection parse_fault_injection(std::string_view text);

struct EdgeConfig {
  RegionId region = 0;
  GridCase base_case;
  std::string cloud_addr;
  std::string store_root;
  FaultInjection fault_injection = FaultInjection::None;
};

class EdgeServer : public Node {
 public:
  explicit EdgeServer(EdgeConfig cfg);
  void start(NodeHost& host) override;
  void on_message(PeerId from, const wire::Envelope& env) override;
  void on_disconnect(PeerId peer) override;

  const GridCase& view() const { return view_; }
  const std::map<BusId, ErrorModel>& forecast() const { return forecast_; }
  /// Result summaries received per run.
  const std::map<std::string, msg::RunSummary>& results() const { return results_; }

 private:
  void on_topology(PeerId from, const msg::TopologyReport& report);
  void on_forecast(PeerId from, const msg::ForecastReport& report);
  void on_run_open(const wire::Envelope& env, const msg::RunManifest& manifest);
  void reject(PeerId to, const wire::RunId& run, std::string code, std::string text,
              std::optional<std::uint64_t> of = std::nullopt);

  EdgeConfig cfg_;
  Partition partition_;
  GridCase view_;
  std::map<BusId, ErrorModel> forecast_;
  std::map<PeerId, std::string> ues_;
  std::set<std::string> runs_;
  std::map<std::string, msg::RunSummary> results_;
  std::unique_ptr<ObjectStore> store_;
  NodeHost* host_ = nullptr;
  PeerId cloud_ = -1;
};

// ---- cloud ----

struct CloudConfig {
  GridCase base_case;
  std::string store_root;
  unsigned workers = 2;
};

enum class RunStatus { Collecting, Simulating, Done, Aborted };

class CloudCoordinator : public Node {
 public:
  explicit CloudCoordinator(CloudConfig cfg);
  void start(NodeHost& host) override;
  void on_message(PeerId from, const wire::Envelope& env) override;
  void on_disconnect(PeerId peer) override;

  /// Simulations started so far (one per completed barrier).
  int simulations() const { return simulations_; }
  std::optional<RunStatus> status(const std::string& run_id) const;

 private:
  struct Run {
    msg::RunManifest manifest;
    wire::RunId wire_id{};
    RunStatus status = RunStatus::Collecting;
    std::set<RegionId> sent;  // regions RunOpen went to
    std::map<RegionId, std::string> partials;
    std::map<RegionId, std::string> scenarios;
    TimerId deadline = 0;
    std::set<PeerId> watchers;  // controllers to notify
  };

  void open_run(PeerId from, const wire::Envelope& env, msg::RunManifest manifest);
  void offer(Run& run);
  void on_ready(PeerId from, const wire::Envelope& env, RegionId region, const std::string& key, bool scenarios);
  void check_barrier(const std::string& run_id);
  void on_deadline(const std::string& run_id);
  void notify(Run& run, const wire::Envelope& env);
  void reject(PeerId to, const wire::RunId& run, std::string code, std::string text);

  CloudConfig cfg_;
  Partition partition_;
  std::unique_ptr<ObjectStore> store_;
  NodeHost* host_ = nullptr;
  std::map<RegionId, PeerId> edges_;
  std::set<PeerId> controllers_;
  std::map<std::string, Run> runs_;
  int simulations_ = 0;
};

/// What the coordinator computes once a barrier completes; also the
/// monolithic reference used by the harness.
struct RunComputation {
  std::string result_blob;
  msg::RunSummary summary;
};

/// Rebuilds the current case from the uploaded snapshots, merges the
/// partials and runs the topology or DSA pipeline.
RunComputation compute_run(const GridCase& base_case, const msg::RunManifest& manifest,
                           const std::vector<msg::PartialArtifact>& partials, const std::vector<ScenarioSet>& scenario_sets,
                           unsigned workers);

/// The region's own scenario draw, as an edge performs it.
ScenarioSet region_scenarios(const GridCase& view, const Partition& partition, RegionId region,
                             const msg::DsaParams& dsa, const std::map<BusId, ErrorModel>& overrides);

/// Seed for a region's draw, derived from the run seed.
std::uint64_t region_seed(std::uint64_t run_seed, RegionId region);

/// Joint scenarios: Cartesian product of the regional sets in region order,
/// weights multiplied, multipliers laid out over `all_load_buses`.
std::pair<std::vector<Scenario>, std::vector<double>> combine_scenarios(const std::vector<ScenarioSet>& sets,
                                                                       std::span<const BusId> all_load_buses);

// ---- controller ----

struct ControllerOutcome {
  bool finished = false;
  std::optional<msg::RunResult> result;
  std::optional<msg::ErrorMsg> error;
};

/// Opens one run on the coordinator, waits for its result or error, then
/// sends RunClose (optionally asking every node to shut down).
class Controller : public Node {
 public:
  Controller(std::string cloud_addr, msg::RunManifest manifest, bool shutdown_after)
      : cloud_addr_(std::move(cloud_addr)), manifest_(std::move(manifest)), shutdown_after_(shutdown_after) {}
  void start(NodeHost& host) override;
  void on_message(PeerId from, const wire::Envelope& env) override;
  void on_disconnect(PeerId peer) override;
  const ControllerOutcome& outcome() const { return outcome_; }

 private:
  void finish(int exit_code);

  std::string cloud_addr_;
  msg::RunManifest manifest_;
  bool shutdown_after_;
  NodeHost* host_ = nullptr;
  PeerId cloud_ = -1;
  ControllerOutcome outcome_;
};

}  // namespace gridedge
