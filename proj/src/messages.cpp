// SPDX-License-Identifier: Apache-2.0
#include "gridedge/messages.hpp"

namespace gridedge::msg {

namespace {

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

Complex complex_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string_view dist_name(ErrorDistribution d) { return d == ErrorDistribution::Gaussian ? "gaussian" : "uniform"; }

ErrorDistribution parse_dist(const std::string& s) {
  if (s == "gaussian") return ErrorDistribution::Gaussian;
  if (s == "uniform") return ErrorDistribution::Uniform;
  throw Error(Errc::BadPayload, "unknown error distribution: " + s);
}

json error_model_json(const ErrorModel& m) {
  return {{"dist", dist_name(m.dist)}, {"param", m.param}, {"truncation", m.truncation}};
}

ErrorModel error_model_from(const json& j) {
  ErrorModel m;
  m.dist = parse_dist(j.at("dist").get<std::string>());
  m.param = j.at("param").get<double>();
  m.truncation = j.value("truncation", 3.0);
  return m;
}

}  // namespace

std::string canonical(const json& value) { return value.dump(-1, ' ', false, json::error_handler_t::strict); }

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::BadPayload, e.what());
  }
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Ue: return "ue";
    case Role::Edge: return "edge";
    case Role::Cloud: return "cloud";
    case Role::Controller: return "controller";
  }
  return "?";
}

std::string_view to_string(RunMode mode) { return mode == RunMode::Topology ? "topology" : "dsa"; }

RunMode parse_run_mode(std::string_view text) {
  if (text == "topology") return RunMode::Topology;
  if (text == "dsa") return RunMode::Dsa;
  throw Error(Errc::InvalidArgument, "unknown run mode: " + std::string(text));
}

void RunManifest::validate() const {
  wire::make_run_id(run_id);
  if (expected_regions.empty()) throw Error(Errc::InvalidArgument, "manifest lists no regions");
  if (!(deadline_s > 0.0)) throw Error(Errc::InvalidArgument, "deadline must be positive");
  if (mode == RunMode::Dsa && (dsa.k == 0 || dsa.k > dsa.n_raw)) {
    throw Error(Errc::InvalidArgument, "dsa needs 1 <= k <= n_raw");
  }
}

void to_json(json& j, const Hello& m) {
  j = {{"node_id", m.node_id}, {"role", to_string(m.role)}};
  if (m.region != 0) j["region"] = m.region;
}
void from_json(const json& j, Hello& m) {
  m.node_id = j.at("node_id").get<std::string>();
  const auto role = j.at("role").get<std::string>();
  if (role == "ue") m.role = Role::Ue;
  else if (role == "edge") m.role = Role::Edge;
  else if (role == "cloud") m.role = Role::Cloud;
  else if (role == "controller") m.role = Role::Controller;
  else throw Error(Errc::BadPayload, "unknown role: " + role);
  m.region = j.value("region", RegionId{0});
}

void to_json(json& j, const BranchDelta& m) { j = {{"id", m.id}, {"status", to_string(m.status)}}; }
void from_json(const json& j, BranchDelta& m) {
  m.id = j.at("id").get<BranchId>();
  m.status = parse_branch_status(j.at("status").get<std::string>());
}

void to_json(json& j, const LoadDelta& m) { j = {{"bus", m.bus}, {"p_load", m.p_load}, {"q_load", m.q_load}}; }
void from_json(const json& j, LoadDelta& m) {
  m.bus = j.at("bus").get<BusId>();
  m.p_load = j.at("p_load").get<double>();
  m.q_load = j.at("q_load").get<double>();
}

void to_json(json& j, const TopologyReport& m) {
  j = {{"seq", m.seq}, {"branches", m.branches}, {"loads", m.loads}};
}
void from_json(const json& j, TopologyReport& m) {
  m.seq = j.at("seq").get<std::uint64_t>();
  m.branches = j.value("branches", std::vector<BranchDelta>{});
  m.loads = j.value("loads", std::vector<LoadDelta>{});
}

void to_json(json& j, const ForecastDelta& m) {
  j = error_model_json(m.model);
  j["bus"] = m.bus;
}
void from_json(const json& j, ForecastDelta& m) {
  m.bus = j.at("bus").get<BusId>();
  m.model = error_model_from(j);
}

void to_json(json& j, const ForecastReport& m) { j = {{"seq", m.seq}, {"errors", m.errors}}; }
void from_json(const json& j, ForecastReport& m) {
  m.seq = j.at("seq").get<std::uint64_t>();
  m.errors = j.at("errors").get<std::vector<ForecastDelta>>();
}

void to_json(json& j, const Ack& m) {
  j = json::object();
  if (m.of) j["of"] = *m.of;
}
void from_json(const json& j, Ack& m) {
  if (!j.is_object()) throw Error(Errc::BadPayload, "Ack payload must be an object");
  m.of = optional_field<std::uint64_t>(j, "of");
}

void to_json(json& j, const PartialReady& m) { j = {{"region", m.region}, {"store_key", m.store_key}}; }
void from_json(const json& j, PartialReady& m) {
  m.region = j.at("region").get<RegionId>();
  m.store_key = j.at("store_key").get<std::string>();
}

void to_json(json& j, const ScenarioReady& m) { j = {{"region", m.region}, {"store_key", m.store_key}}; }
void from_json(const json& j, ScenarioReady& m) {
  m.region = j.at("region").get<RegionId>();
  m.store_key = j.at("store_key").get<std::string>();
}

void to_json(json& j, const RunSummary& m) {
  j = {{"verdict", to_string(m.verdict)}, {"n_scenarios", m.n_scenarios}};
  j["t_unstable"] = m.t_unstable ? json(*m.t_unstable) : json(nullptr);
  if (m.insecurity_probability) j["insecurity_probability"] = *m.insecurity_probability;
}
void from_json(const json& j, RunSummary& m) {
  m.verdict = parse_verdict(j.at("verdict").get<std::string>());
  m.n_scenarios = j.value("n_scenarios", std::size_t{0});
  m.t_unstable = optional_field<double>(j, "t_unstable");
  m.insecurity_probability = optional_field<double>(j, "insecurity_probability");
}

void to_json(json& j, const RunResult& m) { j = {{"store_key", m.store_key}, {"summary", m.summary}}; }
void from_json(const json& j, RunResult& m) {
  m.store_key = j.at("store_key").get<std::string>();
  m.summary = j.at("summary").get<RunSummary>();
}

void to_json(json& j, const ErrorMsg& m) {
  j = {{"code", m.code}, {"text", m.text}};
  if (!m.missing_regions.empty()) j["missing_regions"] = m.missing_regions;
  if (m.of) j["of"] = *m.of;
}
void from_json(const json& j, ErrorMsg& m) {
  m.code = j.at("code").get<std::string>();
  m.text = j.at("text").get<std::string>();
  m.missing_regions = j.value("missing_regions", std::vector<RegionId>{});
  m.of = optional_field<std::uint64_t>(j, "of");
}

void to_json(json& j, const RunManifest& m) {
  json fault = {{"faulted_bus", m.fault.faulted_bus},
                {"t_fault", m.fault.t_fault},
                {"t_clear", m.fault.t_clear},
                {"y_fault", complex_json(m.fault.y_fault)}};
  fault["cleared_branch"] = m.fault.cleared_branch ? json(*m.fault.cleared_branch) : json(nullptr);
  j = {{"run_id", m.run_id},
       {"expected_regions", m.expected_regions},
       {"fault", fault},
       {"sim",
        {{"dt", m.sim.dt},
         {"t_end", m.sim.t_end},
         {"omega_s", m.sim.omega_s},
         {"angle_threshold", m.sim.angle_threshold},
         {"max_points", m.sim.max_points}}},
       {"mode", to_string(m.mode)},
       {"deadline_s", m.deadline_s}};
  if (m.mode == RunMode::Dsa) {
    j["dsa"] = {{"n_raw", m.dsa.n_raw}, {"k", m.dsa.k}, {"seed", m.dsa.seed}, {"error", error_model_json(m.dsa.error)}};
  }
}
void from_json(const json& j, RunManifest& m) {
  m.run_id = j.at("run_id").get<std::string>();
  m.expected_regions = j.at("expected_regions").get<std::set<RegionId>>();
  const auto& f = j.at("fault");
  m.fault.faulted_bus = f.at("faulted_bus").get<BusId>();
  m.fault.cleared_branch = optional_field<BranchId>(f, "cleared_branch");
  m.fault.t_fault = f.at("t_fault").get<double>();
  m.fault.t_clear = f.at("t_clear").get<double>();
  m.fault.y_fault = complex_from(f.at("y_fault"));
  const auto& s = j.at("sim");
  m.sim.dt = s.at("dt").get<double>();
  m.sim.t_end = s.at("t_end").get<double>();
  m.sim.omega_s = s.at("omega_s").get<double>();
  m.sim.angle_threshold = s.at("angle_threshold").get<double>();
  m.sim.max_points = s.at("max_points").get<std::size_t>();
  m.mode = parse_run_mode(j.at("mode").get<std::string>());
  m.deadline_s = j.at("deadline_s").get<double>();
  if (m.mode == RunMode::Dsa) {
    const auto& d = j.at("dsa");
    m.dsa.n_raw = d.at("n_raw").get<std::size_t>();
    m.dsa.k = d.at("k").get<std::size_t>();
    m.dsa.seed = d.at("seed").get<std::uint64_t>();
    m.dsa.error = error_model_from(d.at("error"));
  }
}

void to_json(json& j, const RunOpen& m) { j = {{"manifest", m.manifest}}; }
void from_json(const json& j, RunOpen& m) { m.manifest = j.at("manifest").get<RunManifest>(); }

void to_json(json& j, const RunClose& m) { j = {{"run_id", m.run_id}, {"shutdown", m.shutdown}}; }
void from_json(const json& j, RunClose& m) {
  m.run_id = j.at("run_id").get<std::string>();
  m.shutdown = j.value("shutdown", false);
}

std::string encode_partial(const PartialArtifact& a) {
  const auto& p = a.partial;
  json terms = json::array();
  for (const auto& [key, values] : p.terms) {
    json stamps = json::array();
    for (const auto& z : values) stamps.push_back(complex_json(z));
    terms.push_back({key.first, key.second, stamps});
  }
  json j = {{"region", p.region},        {"n", p.n},
            {"bus_ids", p.bus_ids},      {"branch_ids", p.branch_ids},
            {"owned_buses", p.owned_buses}, {"terms", terms},
            {"branches", a.branches},    {"loads", a.loads}};
  return canonical(j);
}

PartialArtifact decode_partial(std::string_view text) {
  try {
    const auto j = parse_json(text);
    PartialArtifact a;
    auto& p = a.partial;
    p.region = j.at("region").get<RegionId>();
    p.n = j.at("n").get<std::size_t>();
    p.bus_ids = j.at("bus_ids").get<std::vector<BusId>>();
    p.branch_ids = j.at("branch_ids").get<std::set<BranchId>>();
    p.owned_buses = j.at("owned_buses").get<std::set<BusId>>();
    if (p.bus_ids.size() != p.n) throw Error(Errc::BadPayload, "partial bus list does not match n");
    for (const auto& t : j.at("terms")) {
      const EntryKey key{t.at(0).get<int>(), t.at(1).get<int>()};
      if (key.first < 0 || key.second < 0 || static_cast<std::size_t>(key.first) >= p.n ||
          static_cast<std::size_t>(key.second) >= p.n) {
        throw Error(Errc::BadPayload, "partial entry outside the matrix");
      }
      auto& values = p.terms[key];
      for (const auto& z : t.at(2)) values.push_back(complex_from(z));
    }
    a.branches = j.at("branches").get<std::vector<BranchDelta>>();
    a.loads = j.at("loads").get<std::vector<LoadDelta>>();
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::BadPayload, std::string("partial artifact: ") + e.what());
  }
}

std::string encode_scenarios(const ScenarioSet& set) {
  json reps = json::array();
  for (const auto& s : set.representatives) {
    reps.push_back({{"id", s.id}, {"seed", s.seed}, {"multipliers", s.multipliers}});
  }
  return canonical(
      {{"load_buses", set.load_buses}, {"representatives", reps}, {"weights", set.weights}, {"n_raw", set.n_raw}});
}

ScenarioSet decode_scenarios(std::string_view text) {
  try {
    const auto j = parse_json(text);
    ScenarioSet set;
    set.load_buses = j.at("load_buses").get<std::vector<BusId>>();
    set.weights = j.at("weights").get<std::vector<double>>();
    set.n_raw = j.at("n_raw").get<std::size_t>();
    for (const auto& r : j.at("representatives")) {
      Scenario s;
      s.id = r.at("id").get<int>();
      s.seed = r.at("seed").get<std::uint64_t>();
      s.multipliers = r.at("multipliers").get<std::vector<double>>();
      if (s.multipliers.size() != set.load_buses.size()) throw Error(Errc::BadPayload, "scenario dimension mismatch");
      set.representatives.push_back(std::move(s));
    }
    if (set.weights.size() != set.representatives.size()) throw Error(Errc::BadPayload, "one weight per scenario");
    return set;
  } catch (const json::exception& e) {
    throw Error(Errc::BadPayload, std::string("scenario artifact: ") + e.what());
  }
}

}  // namespace gridedge::msg
