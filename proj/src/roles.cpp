// SPDX-License-Identifier: Apache-2.0
#include "gridedge/roles.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/pipeline.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace {

std::string str(double v) { return text::format_double(v); }

std::string join_regions(const std::vector<RegionId>& regions) {
  std::string out;
  for (auto r : regions) out += (out.empty() ? "" : ",") + std::to_string(r);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void validate_model(const ErrorModel& m) {
  if (!(m.param >= 0.0) || !std::isfinite(m.param)) throw Error(Errc::InvalidArgument, "error width must be >= 0");
  if (m.dist == ErrorDistribution::Gaussian && !(m.param > 0.0)) {
    throw Error(Errc::InvalidArgument, "gaussian sigma must be > 0");
  }
  if (!(m.truncation > 0.0)) throw Error(Errc::InvalidArgument, "truncation must be > 0");
}

}  // namespace

// ---------------------------------------------------------------- scripts

std::vector<ScriptItem> parse_script(const std::string& text) {
  std::vector<ScriptItem> items;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  double last_t = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    auto fields = text::split(line, ',');
    for (auto& f : fields) f = std::string(text::trim(f));
    const auto where = "script line " + std::to_string(line_no);
    try {
      if (fields.size() < 2) throw Error(Errc::InvalidArgument, "expected `t, kind, ...`");
      ScriptItem item;
      item.t = text::parse_double(fields[0]);
      if (!(item.t >= last_t)) throw Error(Errc::InvalidArgument, "timestamps must be nondecreasing");
      last_t = item.t;
      const auto& kind = fields[1];
      if (kind == "branch" && fields.size() == 4) {
        const auto status = fields[3] == "open" || fields[3] == "Open"       ? BranchStatus::Open
                            : fields[3] == "closed" || fields[3] == "Closed" ? BranchStatus::Closed
                                                                             : throw Error(Errc::InvalidArgument,
                                                                                           "status must be open|closed");
        item.branch = msg::BranchDelta{static_cast<BranchId>(text::parse_int(fields[2])), status};
      } else if (kind == "load" && fields.size() == 5) {
        item.load = msg::LoadDelta{static_cast<BusId>(text::parse_int(fields[2])), text::parse_double(fields[3]),
                                   text::parse_double(fields[4])};
      } else if (kind == "forecast" && (fields.size() == 5 || fields.size() == 6)) {
        msg::ForecastDelta f;
        f.bus = static_cast<BusId>(text::parse_int(fields[2]));
        if (fields[3] == "gaussian") f.model.dist = ErrorDistribution::Gaussian;
        else if (fields[3] == "uniform") f.model.dist = ErrorDistribution::Uniform;
        else throw Error(Errc::InvalidArgument, "distribution must be gaussian|uniform");
        f.model.param = text::parse_double(fields[4]);
        if (fields.size() == 6) f.model.truncation = text::parse_double(fields[5]);
        item.forecast = f;
      } else {
        throw Error(Errc::InvalidArgument, "unknown entry `" + kind + "` or wrong field count");
      }
      items.push_back(std::move(item));
    } catch (const Error& e) {
      throw Error(Errc::InvalidArgument, where + ": " + e.what());
    }
  }
  return items;
}

std::vector<ScriptItem> load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open script " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_script(s.str());
}

// ---------------------------------------------------------------- UE

void UeAgent::start(NodeHost& host) {
  host_ = &host;
  try {
    edge_ = host.connect(cfg_.edge_addr);
  } catch (const Error& e) {
    report_.error = e.what();
    host.log("ue_error", {{"error", e.what()}});
    host.stop(2);
    return;
  }
  report_.connected = true;
  Pending hello;
  hello.envelope = msg::envelope(msg::Hello{host.node_id(), msg::Role::Ue, 0});
  pending_.emplace(0, std::move(hello));
  transmit(0);
  const double t0 = host.now();
  for (std::size_t i = 0; i < cfg_.script.size(); ++i) {
    const double delay = std::max(0.0, cfg_.script[i].t - (host.now() - t0));
    host.start_timer(delay, [this, i] { send_item(i); });
  }
}

void UeAgent::send_item(std::size_t index) {
  const auto& item = cfg_.script[index];
  const std::uint64_t seq = index + 1;
  Pending p;
  if (item.forecast) {
    msg::ForecastReport r;
    r.seq = seq;
    r.errors = {*item.forecast};
    p.envelope = msg::envelope(r);
  } else {
    msg::TopologyReport r;
    r.seq = seq;
    if (item.branch) r.branches = {*item.branch};
    if (item.load) r.loads = {*item.load};
    p.envelope = msg::envelope(r);
  }
  ++sent_;
  pending_[seq] = std::move(p);
  transmit(seq);
}

void UeAgent::transmit(std::uint64_t seq) {
  auto& p = pending_.at(seq);
  ++p.attempts;
  host_->send(edge_, p.envelope);
  host_->log(seq == 0 ? "ue_hello" : "ue_send", {{"seq", std::to_string(seq)}, {"attempt", std::to_string(p.attempts)}});
  p.timer = host_->start_timer(cfg_.ack_timeout_s, [this, seq] { on_timeout(seq); });
}

void UeAgent::on_timeout(std::uint64_t seq) {
  auto it = pending_.find(seq);
  if (it == pending_.end()) return;
  if (it->second.attempts < 2) {
    host_->log("ue_retry", {{"seq", std::to_string(seq)}});
    transmit(seq);
    return;
  }
  host_->log("ue_failed", {{"seq", std::to_string(seq)}});
  if (seq == 0) {
    hello_acked_ = true;  // give up on the greeting but still run the script
  } else {
    ++report_.failed;
  }
  pending_.erase(it);
  maybe_finish();
}

void UeAgent::settle(std::uint64_t seq) {
  auto it = pending_.find(seq);
  if (it == pending_.end()) return;
  host_->cancel_timer(it->second.timer);
  pending_.erase(it);
}

void UeAgent::on_message(PeerId, const wire::Envelope& env) {
  try {
    if (env.type == wire::MsgType::Ack) {
      const auto ack = msg::payload_as<msg::Ack>(env);
      const std::uint64_t seq = ack.of.value_or(0);
      if (!pending_.count(seq)) return;
      settle(seq);
      if (seq == 0) {
        hello_acked_ = true;
      } else {
        ++report_.delivered;
        host_->log("ue_acked", {{"seq", std::to_string(seq)}});
      }
    } else if (env.type == wire::MsgType::ErrorMsg) {
      const auto err = msg::payload_as<msg::ErrorMsg>(env);
      host_->log("ue_rejected", {{"seq", err.of ? std::to_string(*err.of) : ""}, {"code", err.code}, {"text", err.text}});
      if (err.of && pending_.count(*err.of)) {
        settle(*err.of);
        if (*err.of != 0) ++report_.rejected;
        else hello_acked_ = true;
      }
    }
  } catch (const Error& e) {
    host_->log("ue_bad_message", {{"error", e.what()}});
  }
  maybe_finish();
}

void UeAgent::on_disconnect(PeerId) {
  if (!host_) return;
  for (const auto& [seq, p] : pending_) {
    host_->cancel_timer(p.timer);
    if (seq != 0) ++report_.failed;
  }
  report_.failed += static_cast<int>(cfg_.script.size() - sent_);
  sent_ = cfg_.script.size();
  pending_.clear();
  report_.error = "edge closed the connection";
  host_->log("ue_done", {{"delivered", std::to_string(report_.delivered)},
                         {"rejected", std::to_string(report_.rejected)},
                         {"failed", std::to_string(report_.failed)},
                         {"error", report_.error}});
  host_->stop(2);
}

void UeAgent::maybe_finish() {
  if (!hello_acked_ || sent_ < cfg_.script.size() || !pending_.empty()) return;
  host_->log("ue_done", {{"delivered", std::to_string(report_.delivered)},
                         {"rejected", std::to_string(report_.rejected)},
                         {"failed", std::to_string(report_.failed)}});
  sent_ = cfg_.script.size() + 1;  // finish once
  host_->stop(0);
}

// ---------------------------------------------------------------- edge

FaultInjection parse_fault_injection(std::string_view text) {
  if (text == "none") return FaultInjection::None;
  if (text == "withhold") return FaultInjection::Withhold;
  if (text == "duplicate") return FaultInjection::Duplicate;
  throw Error(Errc::InvalidArgument, "edge.fault_injection must be none|withhold|duplicate");
}

EdgeServer::EdgeServer(EdgeConfig cfg) : cfg_(std::move(cfg)) {
  partition_ = Partition::from_case(cfg_.base_case);
  if (!partition_.regions.count(cfg_.region)) {
    throw Error(Errc::UnknownRegion, "region " + std::to_string(cfg_.region) + " owns nothing in the case");
  }
  view_ = cfg_.base_case;
}

void EdgeServer::start(NodeHost& host) {
  host_ = &host;
  store_ = std::make_unique<ObjectStore>(cfg_.store_root);
  host.log("edge_start", {{"region", std::to_string(cfg_.region)}});
  if (!cfg_.cloud_addr.empty()) {
    cloud_ = host.connect(cfg_.cloud_addr);
    host.send(cloud_, msg::envelope(msg::Hello{host.node_id(), msg::Role::Edge, cfg_.region}));
  }
}

void EdgeServer::reject(PeerId to, const wire::RunId& run, std::string code, std::string text,
                        std::optional<std::uint64_t> of) {
  host_->log("rejected", {{"code", code}, {"text", text}, {"seq", of ? std::to_string(*of) : ""}});
  msg::ErrorMsg err;
  err.code = std::move(code);
  err.text = std::move(text);
  err.of = of;
  host_->send(to, msg::envelope(err, run));
}

void EdgeServer::on_message(PeerId from, const wire::Envelope& env) {
  try {
    switch (env.type) {
      case wire::MsgType::Hello: {
        const auto hello = msg::payload_as<msg::Hello>(env);
        ues_[from] = hello.node_id;
        host_->log("ue_hello", {{"ue", hello.node_id}});
        host_->send(from, msg::envelope(msg::Ack{}));
        break;
      }
      case wire::MsgType::TopologyReport:
        on_topology(from, msg::payload_as<msg::TopologyReport>(env));
        break;
      case wire::MsgType::ForecastReport:
        on_forecast(from, msg::payload_as<msg::ForecastReport>(env));
        break;
      case wire::MsgType::RunOpen:
        on_run_open(env, msg::payload_as<msg::RunOpen>(env).manifest);
        break;
      case wire::MsgType::RunResult: {
        const auto result = msg::payload_as<msg::RunResult>(env);
        const auto run = wire::run_id_text(env.run_id);
        const auto blob = store_->get(result.store_key);
        results_[run] = result.summary;
        Fields f{{"run", run},
                 {"verdict", std::string(to_string(result.summary.verdict))},
                 {"key", result.store_key},
                 {"bytes", std::to_string(blob.size())}};
        if (result.summary.insecurity_probability) f.emplace_back("p", str(*result.summary.insecurity_probability));
        host_->log("result_recv", f);
        break;
      }
      case wire::MsgType::ErrorMsg: {
        const auto err = msg::payload_as<msg::ErrorMsg>(env);
        host_->log("cloud_error", {{"run", wire::run_id_text(env.run_id)}, {"code", err.code}, {"text", err.text}});
        break;
      }
      case wire::MsgType::RunClose: {
        const auto close = msg::payload_as<msg::RunClose>(env);
        host_->log("run_close", {{"run", close.run_id}, {"shutdown", close.shutdown ? "true" : "false"}});
        if (close.shutdown) host_->stop(0);
        break;
      }
      case wire::MsgType::Ack:
        break;
      default:
        reject(from, env.run_id, "unexpected", std::string(wire::to_string(env.type)) + " is not for an edge");
    }
  } catch (const Error& e) {
    std::optional<std::uint64_t> seq;
    try {
      const auto j = msg::parse_json(env.payload);
      if (j.is_object() && j.contains("seq") && j["seq"].is_number_unsigned()) seq = j["seq"].get<std::uint64_t>();
    } catch (const Error&) {
    }
    reject(from, env.run_id, std::string(errc_name(e.code())), e.what(), seq);
  }
}

void EdgeServer::on_disconnect(PeerId peer) {
  if (peer == cloud_) {
    host_->log("cloud_lost");
    cloud_ = -1;
    return;
  }
  if (auto it = ues_.find(peer); it != ues_.end()) {
    host_->log("ue_lost", {{"ue", it->second}});
    ues_.erase(it);
  }
}

void EdgeServer::on_topology(PeerId from, const msg::TopologyReport& report) {
  const auto ue = ues_.count(from) ? ues_[from] : "peer-" + std::to_string(from);
  host_->log("edge_recv", {{"ue", ue}, {"seq", std::to_string(report.seq)}, {"kind", "topology"}});
  auto next = view_;
  for (const auto& d : report.branches) {
    auto* br = next.find_branch(d.id);
    if (!br) return reject(from, {}, "invalid_argument", "no branch " + std::to_string(d.id), report.seq);
    if (partition_.branch_region.at(d.id) != cfg_.region) {
      return reject(from, {}, "unknown_region", "branch " + std::to_string(d.id) + " belongs to another region",
                    report.seq);
    }
    br->status = d.status;
  }
  for (const auto& d : report.loads) {
    if (!next.has_bus(d.bus)) return reject(from, {}, "invalid_argument", "no bus " + std::to_string(d.bus), report.seq);
    if (partition_.bus_region.at(d.bus) != cfg_.region) {
      return reject(from, {}, "unknown_region", "bus " + std::to_string(d.bus) + " belongs to another region",
                    report.seq);
    }
    if (!std::isfinite(d.p_load) || !std::isfinite(d.q_load)) {
      return reject(from, {}, "invalid_argument", "non-finite load", report.seq);
    }
    next.bus(d.bus).p_load = d.p_load;
    next.bus(d.bus).q_load = d.q_load;
  }
  if (!is_connected(next)) return reject(from, {}, "invalid_case", "the change would island the network", report.seq);
  view_ = std::move(next);
  host_->log("edge_applied", {{"ue", ue}, {"seq", std::to_string(report.seq)}});
  host_->send(from, msg::envelope(msg::Ack{report.seq}));
}

void EdgeServer::on_forecast(PeerId from, const msg::ForecastReport& report) {
  const auto ue = ues_.count(from) ? ues_[from] : "peer-" + std::to_string(from);
  host_->log("edge_recv", {{"ue", ue}, {"seq", std::to_string(report.seq)}, {"kind", "forecast"}});
  auto next = forecast_;
  for (const auto& d : report.errors) {
    if (!view_.has_bus(d.bus)) return reject(from, {}, "invalid_argument", "no bus " + std::to_string(d.bus), report.seq);
    if (partition_.bus_region.at(d.bus) != cfg_.region) {
      return reject(from, {}, "unknown_region", "bus " + std::to_string(d.bus) + " belongs to another region",
                    report.seq);
    }
    try {
      validate_model(d.model);
    } catch (const Error& e) {
      return reject(from, {}, "invalid_argument", e.what(), report.seq);
    }
    next[d.bus] = d.model;
  }
  forecast_ = std::move(next);
  host_->log("edge_applied", {{"ue", ue}, {"seq", std::to_string(report.seq)}});
  host_->send(from, msg::envelope(msg::Ack{report.seq}));
}

void EdgeServer::on_run_open(const wire::Envelope& env, const msg::RunManifest& manifest) {
  const auto& run = manifest.run_id;
  if (runs_.count(run)) {
    reject(cloud_, env.run_id, "duplicate_run", "run " + run + " was already opened here");
    return;
  }
  if (!manifest.expected_regions.count(cfg_.region)) {
    host_->log("run_ignored", {{"run", run}});
    return;
  }
  runs_.insert(run);
  host_->log("edge_run_open", {{"run", run}, {"mode", std::string(msg::to_string(manifest.mode))}});

  struct Upload {
    std::string key;
    std::string blob;
    bool scenarios = false;
  };
  auto view = view_;
  auto forecast = forecast_;
  auto partition = partition_;
  const RegionId region = cfg_.region;
  const auto injection = cfg_.fault_injection;
  auto* store = store_.get();
  auto* host = host_;
  const PeerId cloud = cloud_;
  const auto wire_id = env.run_id;

  host_->run_async([=]() -> std::function<void()> {
    std::vector<Upload> uploads;
    try {
      msg::PartialArtifact artifact;
      artifact.partial = build_partial(view, region, partition);
      for (const auto& br : view.branches) {
        if (partition.branch_region.at(br.id) == region) artifact.branches.push_back({br.id, br.status});
      }
      for (const auto& b : view.buses) {
        if (partition.bus_region.at(b.id) == region) artifact.loads.push_back({b.id, b.p_load, b.q_load});
      }
      uploads.push_back({store_key(run, region, Artifact::PartialY), msg::encode_partial(artifact), false});
      if (manifest.mode == msg::RunMode::Dsa) {
        const auto set = region_scenarios(view, partition, region, manifest.dsa, forecast);
        uploads.push_back({store_key(run, region, Artifact::Scenarios), msg::encode_scenarios(set), true});
      }
      host->log("edge_compute_done", {{"run", run}});
      if (injection == FaultInjection::Withhold) {
        return [host, run] { host->log("withheld", {{"run", run}}); };
      }
      for (const auto& u : uploads) {
        const auto receipt = store->put(u.key, u.blob);
        host->log("store_put_done", {{"run", run},
                                     {"key", receipt.key},
                                     {"bytes", std::to_string(receipt.length)},
                                     {"sha256", receipt.sha256}});
      }
    } catch (const Error& e) {
      const auto code = std::string(errc_name(e.code()));
      const std::string what = e.what();
      return [host, cloud, wire_id, run, code, what] {
        host->log("edge_compute_failed", {{"run", run}, {"code", code}, {"text", what}});
        msg::ErrorMsg err;
        err.code = code;
        err.text = what;
        host->send(cloud, msg::envelope(err, wire_id));
      };
    }
    return [host, store, cloud, wire_id, region, run, injection, uploads] {
      const int copies = injection == FaultInjection::Duplicate ? 2 : 1;
      for (int copy = 0; copy < copies; ++copy) {
        for (const auto& u : uploads) {
          if (copy > 0) {
            try {
              store->put(u.key, u.blob);
            } catch (const Error& e) {
              host->log("duplicate_put", {{"run", run}, {"key", u.key}, {"code", std::string(errc_name(e.code()))}});
            }
          }
          if (u.scenarios) {
            host->send(cloud, msg::envelope(msg::ScenarioReady{region, u.key}, wire_id));
          } else {
            host->send(cloud, msg::envelope(msg::PartialReady{region, u.key}, wire_id));
          }
        }
      }
      host->log("edge_ready_sent", {{"run", run}, {"copies", std::to_string(copies)}});
    };
  });
}

// ---------------------------------------------------------------- cloud

CloudCoordinator::CloudCoordinator(CloudConfig cfg) : cfg_(std::move(cfg)) {
  partition_ = Partition::from_case(cfg_.base_case);
}

void CloudCoordinator::start(NodeHost& host) {
  host_ = &host;
  store_ = std::make_unique<ObjectStore>(cfg_.store_root);
  host.log("cloud_start", {{"regions", std::to_string(partition_.regions.size())}});
}

std::optional<RunStatus> CloudCoordinator::status(const std::string& run_id) const {
  const auto it = runs_.find(run_id);
  if (it == runs_.end()) return std::nullopt;
  return it->second.status;
}

void CloudCoordinator::reject(PeerId to, const wire::RunId& run, std::string code, std::string text) {
  host_->log("rejected", {{"run", wire::run_id_text(run)}, {"code", code}, {"text", text}});
  msg::ErrorMsg err;
  err.code = std::move(code);
  err.text = std::move(text);
  host_->send(to, msg::envelope(err, run));
}

void CloudCoordinator::on_message(PeerId from, const wire::Envelope& env) {
  try {
    switch (env.type) {
      case wire::MsgType::Hello: {
        const auto hello = msg::payload_as<msg::Hello>(env);
        if (hello.role == msg::Role::Edge) {
          edges_[hello.region] = from;
          host_->log("edge_hello", {{"edge", hello.node_id}, {"region", std::to_string(hello.region)}});
        } else {
          controllers_.insert(from);
          host_->log("peer_hello", {{"peer", hello.node_id}, {"role", std::string(msg::to_string(hello.role))}});
        }
        host_->send(from, msg::envelope(msg::Ack{}));
        if (hello.role == msg::Role::Edge) {
          for (auto& [id, run] : runs_) {
            if (run.status == RunStatus::Collecting) offer(run);
          }
        }
        break;
      }
      case wire::MsgType::RunOpen:
        open_run(from, env, msg::payload_as<msg::RunOpen>(env).manifest);
        break;
      case wire::MsgType::PartialReady: {
        const auto m = msg::payload_as<msg::PartialReady>(env);
        on_ready(from, env, m.region, m.store_key, false);
        break;
      }
      case wire::MsgType::ScenarioReady: {
        const auto m = msg::payload_as<msg::ScenarioReady>(env);
        on_ready(from, env, m.region, m.store_key, true);
        break;
      }
      case wire::MsgType::ErrorMsg: {
        const auto err = msg::payload_as<msg::ErrorMsg>(env);
        host_->log("peer_error", {{"run", wire::run_id_text(env.run_id)}, {"code", err.code}, {"text", err.text}});
        break;
      }
      case wire::MsgType::RunClose: {
        const auto close = msg::payload_as<msg::RunClose>(env);
        host_->log("run_close", {{"run", close.run_id}, {"shutdown", close.shutdown ? "true" : "false"}});
        if (close.shutdown) {
          for (const auto& [region, peer] : edges_) host_->send(peer, msg::envelope(close, env.run_id));
          host_->stop(0);
        }
        break;
      }
      case wire::MsgType::Ack:
        break;
      default:
        reject(from, env.run_id, "unexpected", std::string(wire::to_string(env.type)) + " is not for the cloud");
    }
  } catch (const Error& e) {
    reject(from, env.run_id, std::string(errc_name(e.code())), e.what());
  }
}

void CloudCoordinator::on_disconnect(PeerId peer) {
  for (auto it = edges_.begin(); it != edges_.end(); ++it) {
    if (it->second == peer) {
      host_->log("edge_lost", {{"region", std::to_string(it->first)}});
      edges_.erase(it);
      break;
    }
  }
  controllers_.erase(peer);
}

void CloudCoordinator::open_run(PeerId from, const wire::Envelope& env, msg::RunManifest manifest) {
  manifest.validate();
  if (wire::run_id_text(env.run_id) != manifest.run_id) {
    throw Error(Errc::BadPayload, "frame run id does not match the manifest");
  }
  for (RegionId r : manifest.expected_regions) {
    if (!partition_.regions.count(r)) throw Error(Errc::UnknownRegion, "region " + std::to_string(r) + " is not in the case");
  }
  if (runs_.count(manifest.run_id)) {
    reject(from, env.run_id, "duplicate_run", "run " + manifest.run_id + " already exists");
    return;
  }
  validate_fault(cfg_.base_case, manifest.fault);
  const auto id = manifest.run_id;
  auto& run = runs_[id];
  run.manifest = std::move(manifest);
  run.wire_id = env.run_id;
  run.watchers.insert(from);
  std::vector<RegionId> regions(run.manifest.expected_regions.begin(), run.manifest.expected_regions.end());
  host_->log("run_open", {{"run", id},
                          {"mode", std::string(msg::to_string(run.manifest.mode))},
                          {"regions", join_regions(regions)},
                          {"deadline_s", str(run.manifest.deadline_s)}});
  run.deadline = host_->start_timer(run.manifest.deadline_s, [this, id] { on_deadline(id); });
  offer(run);
}

void CloudCoordinator::offer(Run& run) {
  for (RegionId r : run.manifest.expected_regions) {
    if (run.sent.count(r)) continue;
    const auto it = edges_.find(r);
    if (it == edges_.end()) continue;
    host_->send(it->second, msg::envelope(msg::RunOpen{run.manifest}, run.wire_id));
    run.sent.insert(r);
  }
}

void CloudCoordinator::on_ready(PeerId from, const wire::Envelope& env, RegionId region, const std::string& key,
                                bool scenarios) {
  const auto id = wire::run_id_text(env.run_id);
  const auto it = runs_.find(id);
  if (it == runs_.end()) return reject(from, env.run_id, "unknown_run", "no run " + id);
  auto& run = it->second;
  auto& slot = scenarios ? run.scenarios : run.partials;
  if (slot.count(region)) {
    host_->log("duplicate_rejected", {{"run", id}, {"region", std::to_string(region)}, {"key", key}});
    return reject(from, env.run_id, "duplicate_upload",
                  "region " + std::to_string(region) + " already uploaded " + key + "; first upload wins");
  }
  if (run.status != RunStatus::Collecting) {
    return reject(from, env.run_id, "run_closed", "run " + id + " no longer accepts uploads");
  }
  if (!run.manifest.expected_regions.count(region)) {
    return reject(from, env.run_id, "unknown_region", "region " + std::to_string(region) + " is not part of run " + id);
  }
  if (scenarios && run.manifest.mode != msg::RunMode::Dsa) {
    return reject(from, env.run_id, "unexpected", "scenarios uploaded to a topology run");
  }
  const auto expected_key = store_key(id, region, scenarios ? Artifact::Scenarios : Artifact::PartialY);
  if (key != expected_key) return reject(from, env.run_id, "invalid_key", "expected " + expected_key);
  slot[region] = key;
  host_->log("upload_recv", {{"run", id}, {"region", std::to_string(region)}, {"key", key}});
  check_barrier(id);
}

void CloudCoordinator::check_barrier(const std::string& id) {
  auto& run = runs_.at(id);
  const bool dsa = run.manifest.mode == msg::RunMode::Dsa;
  std::vector<std::string> keys;
  for (RegionId r : run.manifest.expected_regions) {
    if (!run.partials.count(r)) return;
    keys.push_back(run.partials.at(r));
    if (dsa) {
      if (!run.scenarios.count(r)) return;
      keys.push_back(run.scenarios.at(r));
    }
  }
  const auto check = store_->wait_for(keys, std::chrono::steady_clock::now() + std::chrono::seconds(1));
  if (!check.complete) {
    host_->log("barrier_missing_keys", {{"run", id}, {"missing", check.missing.front()}});
    return;  // the deadline timer still guards the run
  }
  host_->cancel_timer(run.deadline);
  run.status = RunStatus::Simulating;
  ++simulations_;
  host_->log("barrier_done", {{"run", id}, {"uploads", std::to_string(keys.size())}});

  auto manifest = run.manifest;
  auto partial_keys = run.partials;
  auto scenario_keys = run.scenarios;
  auto* store = store_.get();
  auto* host = host_;
  const auto base = cfg_.base_case;
  const unsigned workers = cfg_.workers;
  host_->run_async([=, this]() -> std::function<void()> {
    try {
      std::vector<msg::PartialArtifact> partials;
      std::vector<ScenarioSet> sets;
      for (const auto& [r, k] : partial_keys) partials.push_back(msg::decode_partial(store->get(k)));
      for (const auto& [r, k] : scenario_keys) sets.push_back(msg::decode_scenarios(store->get(k)));
      auto computed = compute_run(base, manifest, partials, sets, workers);
      std::map<RegionId, std::string> result_keys;
      for (RegionId r : manifest.expected_regions) {
        result_keys[r] = store_key(manifest.run_id, r, Artifact::Result);
        store->put(result_keys[r], computed.result_blob);
      }
      return [this, id, computed, result_keys] {
        auto& run = runs_.at(id);
        run.status = RunStatus::Done;
        Fields f{{"run", id}, {"verdict", std::string(to_string(computed.summary.verdict))}};
        if (computed.summary.t_unstable) f.emplace_back("t_unstable", str(*computed.summary.t_unstable));
        if (computed.summary.insecurity_probability) {
          f.emplace_back("p", str(*computed.summary.insecurity_probability));
        }
        f.emplace_back("scenarios", std::to_string(computed.summary.n_scenarios));
        host_->log("sim_done", f);
        for (const auto& [r, key] : result_keys) {
          const auto edge = edges_.find(r);
          if (edge != edges_.end()) {
            host_->send(edge->second, msg::envelope(msg::RunResult{key, computed.summary}, run.wire_id));
          }
        }
        for (PeerId w : run.watchers) {
          host_->send(w, msg::envelope(msg::RunResult{result_keys.begin()->second, computed.summary}, run.wire_id));
        }
      };
    } catch (const Error& e) {
      const auto code = std::string(errc_name(e.code()));
      const std::string what = e.what();
      return [this, id, code, what] {
        auto& run = runs_.at(id);
        run.status = RunStatus::Aborted;
        host_->log("run_failed", {{"run", id}, {"code", code}, {"text", what}});
        msg::ErrorMsg err;
        err.code = code;
        err.text = what;
        notify(run, msg::envelope(err, run.wire_id));
      };
    }
  });
  (void)host;
}

void CloudCoordinator::on_deadline(const std::string& id) {
  auto& run = runs_.at(id);
  if (run.status != RunStatus::Collecting) return;
  run.status = RunStatus::Aborted;
  std::vector<RegionId> missing;
  const bool dsa = run.manifest.mode == msg::RunMode::Dsa;
  for (RegionId r : run.manifest.expected_regions) {
    if (!run.partials.count(r) || (dsa && !run.scenarios.count(r))) missing.push_back(r);
  }
  host_->log("barrier_timeout", {{"run", id}, {"missing", join_regions(missing)}});
  msg::ErrorMsg err;
  err.code = "barrier_timeout";
  err.text = "run " + id + " timed out waiting for region(s) " + join_regions(missing);
  err.missing_regions = missing;
  notify(run, msg::envelope(err, run.wire_id));
}

void CloudCoordinator::notify(Run& run, const wire::Envelope& env) {
  for (RegionId r : run.manifest.expected_regions) {
    const auto edge = edges_.find(r);
    if (edge != edges_.end()) host_->send(edge->second, env);
  }
  for (PeerId w : run.watchers) host_->send(w, env);
}

// ---------------------------------------------------------------- computation

std::uint64_t region_seed(std::uint64_t run_seed, RegionId region) {
  return splitmix64(run_seed ^ splitmix64(static_cast<std::uint64_t>(region)));
}

ScenarioSet region_scenarios(const GridCase& view, const Partition& partition, RegionId region,
                             const msg::DsaParams& dsa, const std::map<BusId, ErrorModel>& overrides) {
  ForecastSpec spec;
  for (BusId b : view.load_buses()) {
    if (partition.bus_region.at(b) != region) continue;
    spec.load_buses.push_back(b);
    const auto it = overrides.find(b);
    spec.errors.push_back(it == overrides.end() ? dsa.error : it->second);
  }
  const auto seed = region_seed(dsa.seed, region);
  if (spec.load_buses.empty()) {
    ScenarioSet set;
    set.representatives.push_back(Scenario{0, seed, {}});
    set.weights = {1.0};
    set.n_raw = dsa.n_raw;
    return set;
  }
  const auto samples = draw_samples(spec, dsa.n_raw, seed);
  auto set = reduce_scenarios(samples, std::min(dsa.k, dsa.n_raw), seed);
  set.load_buses = spec.load_buses;
  return set;
}

std::pair<std::vector<Scenario>, std::vector<double>> combine_scenarios(const std::vector<ScenarioSet>& sets,
                                                                       std::span<const BusId> all_load_buses) {
  std::vector<Scenario> scenarios{Scenario{0, 0, std::vector<double>(all_load_buses.size(), 1.0)}};
  std::vector<double> weights{1.0};
  for (const auto& set : sets) {
    std::vector<std::size_t> slot;
    for (BusId b : set.load_buses) {
      const auto it = std::find(all_load_buses.begin(), all_load_buses.end(), b);
      if (it == all_load_buses.end()) {
        throw Error(Errc::InvalidArgument, "scenario bus " + std::to_string(b) + " carries no load");
      }
      slot.push_back(static_cast<std::size_t>(it - all_load_buses.begin()));
    }
    if (set.representatives.size() != set.weights.size()) {
      throw Error(Errc::InvalidArgument, "scenario set needs one weight per representative");
    }
    for (const auto& rep : set.representatives) {
      if (rep.multipliers.size() != slot.size()) {
        throw Error(Errc::InvalidArgument, "scenario multipliers do not match the set's load buses");
      }
    }
    std::vector<Scenario> next;
    std::vector<double> next_w;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      for (std::size_t j = 0; j < set.representatives.size(); ++j) {
        Scenario s = scenarios[i];
        for (std::size_t d = 0; d < slot.size(); ++d) s.multipliers[slot[d]] = set.representatives[j].multipliers[d];
        s.id = static_cast<int>(next.size());
        next.push_back(std::move(s));
        next_w.push_back(weights[i] * set.weights[j]);
      }
    }
    scenarios = std::move(next);
    weights = std::move(next_w);
  }
  return {scenarios, weights};
}

RunComputation compute_run(const GridCase& base_case, const msg::RunManifest& manifest,
                           const std::vector<msg::PartialArtifact>& partials, const std::vector<ScenarioSet>& scenario_sets,
                           unsigned workers) {
  GridCase c = base_case;
  std::vector<PartialAdmittance> parts;
  for (const auto& a : partials) {
    for (const auto& d : a.branches) {
      auto* br = c.find_branch(d.id);
      if (!br) throw Error(Errc::InvalidArgument, "upload names unknown branch " + std::to_string(d.id));
      br->status = d.status;
    }
    for (const auto& d : a.loads) {
      if (!c.has_bus(d.bus)) throw Error(Errc::InvalidArgument, "upload names unknown bus " + std::to_string(d.bus));
      c.bus(d.bus).p_load = d.p_load;
      c.bus(d.bus).q_load = d.q_load;
    }
    parts.push_back(a.partial);
  }
  const auto y = merge_partials(parts, c.closed_branch_ids());

  RunComputation out;
  if (manifest.mode == msg::RunMode::Topology) {
    const auto result = run_transient(c, y, manifest.fault, manifest.sim);
    out.result_blob = trajectory_csv(result);
    out.summary.verdict = result.verdict;
    out.summary.t_unstable = result.t_unstable;
    out.summary.n_scenarios = 1;
    return out;
  }
  const auto loads = c.load_buses();
  const auto [scenarios, weights] = combine_scenarios(scenario_sets, loads);
  const auto report = assess_scenarios(c, y, manifest.fault, manifest.sim, scenarios, weights, workers);
  out.result_blob = security_csv(report);
  out.summary.insecurity_probability = report.insecurity_probability;
  out.summary.verdict = report.insecurity_probability > 0.0 ? Verdict::Unstable : Verdict::Stable;
  out.summary.n_scenarios = scenarios.size();
  return out;
}

// ---------------------------------------------------------------- controller

void Controller::start(NodeHost& host) {
  host_ = &host;
  try {
    cloud_ = host.connect(cloud_addr_);
  } catch (const Error& e) {
    host.log("controller_error", {{"error", e.what()}});
    outcome_.finished = true;
    host.stop(2);
    return;
  }
  const auto run = wire::make_run_id(manifest_.run_id);
  host.send(cloud_, msg::envelope(msg::Hello{host.node_id(), msg::Role::Controller, 0}));
  host.send(cloud_, msg::envelope(msg::RunOpen{manifest_}, run));
  host.log("run_requested", {{"run", manifest_.run_id}, {"mode", std::string(msg::to_string(manifest_.mode))}});
}

void Controller::on_message(PeerId, const wire::Envelope& env) {
  if (outcome_.finished || wire::run_id_text(env.run_id) != manifest_.run_id) return;
  try {
    if (env.type == wire::MsgType::RunResult) {
      outcome_.result = msg::payload_as<msg::RunResult>(env);
      host_->log("run_result", {{"run", manifest_.run_id},
                                {"verdict", std::string(to_string(outcome_.result->summary.verdict))},
                                {"key", outcome_.result->store_key}});
      finish(0);
    } else if (env.type == wire::MsgType::ErrorMsg) {
      outcome_.error = msg::payload_as<msg::ErrorMsg>(env);
      std::vector<RegionId> missing = outcome_.error->missing_regions;
      host_->log("run_error", {{"run", manifest_.run_id},
                               {"code", outcome_.error->code},
                               {"text", outcome_.error->text},
                               {"missing", join_regions(missing)}});
      finish(outcome_.error->code == "barrier_timeout" ? 3 : 2);
    }
  } catch (const Error& e) {
    host_->log("controller_bad_message", {{"error", e.what()}});
  }
}

void Controller::on_disconnect(PeerId) {
  if (outcome_.finished) return;
  host_->log("controller_error", {{"error", "cloud closed the connection"}});
  outcome_.finished = true;
  host_->stop(2);
}

void Controller::finish(int exit_code) {
  outcome_.finished = true;
  host_->send(cloud_, msg::envelope(msg::RunClose{manifest_.run_id, shutdown_after_}, wire::make_run_id(manifest_.run_id)));
  host_->stop(exit_code);
}

}  // namespace gridedge
