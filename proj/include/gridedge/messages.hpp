// SPDX-License-Identifier: Apache-2.0
//
// Typed message payloads and store artifacts, carried as canonical JSON:
// sorted keys, no insignificant whitespace, shortest round-trip numbers.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridedge/dynamics.hpp"
#include "gridedge/error.hpp"
#include "gridedge/sampling.hpp"
#include "gridedge/wire.hpp"
#include "gridedge/ybus.hpp"

namespace gridedge::msg {

using json = nlohmann::json;

std::string canonical(const json& value);
/// Throws BadPayload on malformed JSON.
json parse_json(std::string_view text);

enum class Role { Ue, Edge, Cloud, Controller };
std::string_view to_string(Role role);

struct Hello {
  static constexpr auto kType = wire::MsgType::Hello;
  std::string node_id;
  Role role = Role::Ue;
  RegionId region = 0;  // edges only
};

/// Absolute assignments, so applying one twice is harmless.
struct BranchDelta {
  BranchId id = 0;
  BranchStatus status = BranchStatus::Closed;
  bool operator==(const BranchDelta&) const = default;
};

struct LoadDelta {
  BusId bus = 0;
  double p_load = 0.0;
  double q_load = 0.0;
  bool operator==(const LoadDelta&) const = default;
};

struct TopologyReport {
  static constexpr auto kType = wire::MsgType::TopologyReport;
  std::uint64_t seq = 0;
  std::vector<BranchDelta> branches;
  std::vector<LoadDelta> loads;
};

struct ForecastDelta {
  BusId bus = 0;
  ErrorModel model;
};

struct ForecastReport {
  static constexpr auto kType = wire::MsgType::ForecastReport;
  std::uint64_t seq = 0;
  std::vector<ForecastDelta> errors;
};

struct Ack {
  static constexpr auto kType = wire::MsgType::Ack;
  std::optional<std::uint64_t> of;
};

struct PartialReady {
  static constexpr auto kType = wire::MsgType::PartialReady;
  RegionId region = 0;
  std::string store_key;
};

struct ScenarioReady {
  static constexpr auto kType = wire::MsgType::ScenarioReady;
  RegionId region = 0;
  std::string store_key;
};

struct RunSummary {
  Verdict verdict = Verdict::Stable;
  std::optional<double> t_unstable;
  std::optional<double> insecurity_probability;  // DSA runs
  std::size_t n_scenarios = 0;
};

struct RunResult {
  static constexpr auto kType = wire::MsgType::RunResult;
  std::string store_key;
  RunSummary summary;
};

struct ErrorMsg {
  static constexpr auto kType = wire::MsgType::ErrorMsg;
  std::string code;
  std::string text;
  std::vector<RegionId> missing_regions;
  std::optional<std::uint64_t> of;  // seq of the rejected report, if any
};

enum class RunMode { Topology, Dsa };
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

struct DsaParams {
  std::size_t n_raw = 200;
  std::size_t k = 10;
  std::uint64_t seed = 1;
  ErrorModel error;
};

struct RunManifest {
  std::string run_id;
  std::set<RegionId> expected_regions;
  FaultSpec fault;
  SimulationConfig sim;
  RunMode mode = RunMode::Topology;
  DsaParams dsa;
  double deadline_s = 30.0;

  void validate() const;
};

struct RunOpen {
  static constexpr auto kType = wire::MsgType::RunOpen;
  RunManifest manifest;
};

struct RunClose {
  static constexpr auto kType = wire::MsgType::RunClose;
  std::string run_id;
  bool shutdown = false;
};

void to_json(json& j, const Hello& m);
void from_json(const json& j, Hello& m);
void to_json(json& j, const BranchDelta& m);
void from_json(const json& j, BranchDelta& m);
void to_json(json& j, const LoadDelta& m);
void from_json(const json& j, LoadDelta& m);
void to_json(json& j, const TopologyReport& m);
void from_json(const json& j, TopologyReport& m);
void to_json(json& j, const ForecastDelta& m);
void from_json(const json& j, ForecastDelta& m);
void to_json(json& j, const ForecastReport& m);
void from_json(const json& j, ForecastReport& m);
void to_json(json& j, const Ack& m);
void from_json(const json& j, Ack& m);
void to_json(json& j, const PartialReady& m);
void from_json(const json& j, PartialReady& m);
void to_json(json& j, const ScenarioReady& m);
void from_json(const json& j, ScenarioReady& m);
void to_json(json& j, const RunSummary& m);
void from_json(const json& j, RunSummary& m);
void to_json(json& j, const RunResult& m);
void from_json(const json& j, RunResult& m);
void to_json(json& j, const ErrorMsg& m);
void from_json(const json& j, ErrorMsg& m);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);
void to_json(json& j, const RunOpen& m);
void from_json(const json& j, RunOpen& m);
void to_json(json& j, const RunClose& m);
void from_json(const json& j, RunClose& m);

template <typename M>
wire::Envelope envelope(const M& message, const wire::RunId& run_id = {}) {
  wire::Envelope env;
  env.type = M::kType;
  env.run_id = run_id;
  env.payload = canonical(json(message));
  return env;
}

/// Throws BadPayload when the type or fields do not match.
template <typename M>
M payload_as(const wire::Envelope& env) {
  if (env.type != M::kType) {
    throw Error(Errc::BadPayload, "expected " + std::string(wire::to_string(M::kType)) + ", got " +
                                      std::string(wire::to_string(env.type)));
  }
  try {
    return parse_json(env.payload).get<M>();
  } catch (const json::exception& e) {
    throw Error(Errc::BadPayload, std::string(wire::to_string(M::kType)) + ": " + e.what());
  }
}

// ---- store artifacts ----

/// One region's upload: its stamps plus the state of everything it owns, so
/// the coordinator can rebuild the current case without a second channel.
struct PartialArtifact {
  PartialAdmittance partial;
  std::vector<BranchDelta> branches;  // every owned branch, Open ones included
  std::vector<LoadDelta> loads;       // every owned bus
};

std::string encode_partial(const PartialArtifact& artifact);
PartialArtifact decode_partial(std::string_view text);

std::string encode_scenarios(const ScenarioSet& set);
ScenarioSet decode_scenarios(std::string_view text);

}  // namespace gridedge::msg
