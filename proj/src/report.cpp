// SPDX-License-Identifier: Apache-2.0
#include "gridedge/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/node.hpp"
#include "gridedge/settings.hpp"
#include "gridedge/store.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace fs = std::filesystem;

namespace {

std::size_t stage_rank(std::string_view stage) {
  return static_cast<std::size_t>(std::find(kStages.begin(), kStages.end(), stage) - kStages.begin());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

RunReport build_report(const std::string& run_id, const std::string& log_dir, const std::string& store_root) {
  RunReport rep;
  rep.run_id = run_id;

  std::vector<LogRecord> records;
  if (fs::is_directory(log_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(log_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".log") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file);
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
          records.push_back(parse_log_line(line));
        } catch (const Error&) {
          rep.warnings.push_back(file.filename().string() + ":" + std::to_string(line_no) + " is not a log line");
        }
      }
    }
    if (files.empty()) rep.warnings.push_back("no log files in " + log_dir);
  } else {
    rep.warnings.push_back("log directory " + log_dir + " does not exist");
  }

  std::vector<std::string> stored;
  if (fs::is_directory(store_root)) stored = ObjectStore(store_root).list("runs/" + run_id + "/");

  auto of_run = [&](const LogRecord& r) { return r.field("run") == run_id; };
  const bool mentioned = std::any_of(records.begin(), records.end(), of_run);
  if (!mentioned && stored.empty()) throw Error(Errc::NotFound, "no logs or stored artifacts for run " + run_id);

  // Time origin: the harness marker, else the cloud opening the run, else the first event.
  std::optional<std::chrono::system_clock::time_point> origin;
  for (const auto& r : records) {
    if (r.event == "run_start" && of_run(r)) {
      origin = r.time;
      rep.time_origin = "run_start";
      break;
    }
  }
  if (!origin) {
    for (const auto& r : records) {
      if (r.event == "run_open" && of_run(r)) {
        origin = r.time;
        rep.time_origin = "run_open";
        break;
      }
    }
  }
  if (!origin && !records.empty()) {
    origin = std::min_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
               return a.time < b.time;
             })->time;
    rep.time_origin = "first_event";
    rep.warnings.push_back("no run_start or run_open event; times are relative to the first log line");
  }

  bool cloud_seen = false;
  for (const auto& r : records) {
    auto add = [&](std::string seq) {
      const double ms = std::chrono::duration<double, std::milli>(r.time - *origin).count();
      rep.rows.push_back(StageRow{run_id, r.event, r.node_id, std::move(seq), ms});
    };
    if (r.event == "ue_send") {
      if (r.field("attempt", "1") == "1") add(r.node_id + "/" + r.field("seq"));
    } else if (r.event == "edge_recv") {
      add(r.field("ue") + "/" + r.field("seq"));
    } else if (!of_run(r)) {
      continue;
    } else if (r.event == "edge_compute_done" || r.event == "barrier_done" || r.event == "result_recv") {
      add("");
    } else if (r.event == "store_put_done") {
      add(r.field("key"));
    } else if (r.event == "sim_done") {
      add("");
      cloud_seen = true;
      rep.outcome = "Completed";
      rep.verdict = parse_verdict(r.field("verdict"));
      if (const auto t = r.field("t_unstable"); !t.empty()) rep.t_unstable = text::parse_double(t);
      if (const auto p = r.field("p"); !p.empty()) rep.insecurity_probability = text::parse_double(p);
      if (const auto n = r.field("scenarios"); !n.empty()) rep.n_scenarios = static_cast<std::size_t>(text::parse_int(n));
    } else if (r.event == "barrier_timeout") {
      cloud_seen = true;
      rep.outcome = "TimedOut";
      const auto missing = parse_region_list(r.field("missing"));
      rep.missing_regions.assign(missing.begin(), missing.end());
    } else if (r.event == "run_failed") {
      cloud_seen = true;
      rep.outcome = "Failed";
    } else if (r.event == "run_open") {
      cloud_seen = true;
    }
  }
  if (!cloud_seen) rep.warnings.push_back("no cloud events for run " + run_id);
  if (rep.outcome.empty()) rep.outcome = "Unknown";
  if (rep.outcome == "Completed") {
    const auto results = std::count_if(stored.begin(), stored.end(), [](const std::string& k) {
      return k.size() >= 7 && k.compare(k.size() - 7, 7, "/result") == 0;
    });
    if (results == 0) rep.warnings.push_back("run completed but no result blob is in the store");
  }

  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const StageRow& a, const StageRow& b) {
    const auto ra = stage_rank(a.stage), rb = stage_rank(b.stage);
    if (ra != rb) return ra < rb;
    if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
    return std::tie(a.node, a.seq) < std::tie(b.node, b.seq);
  });
  return rep;
}

std::string report_csv(const RunReport& report) {
  std::string out = "run_id,stage,node,seq,t_ms\n";
  for (const auto& r : report.rows) {
    out += r.run_id + "," + r.stage + "," + r.node + "," + r.seq + "," + fixed(r.t_ms, 3) + "\n";
  }
  return out;
}

std::string report_summary(const RunReport& report) {
  std::ostringstream s;
  s << "run " << report.run_id << ": " << report.outcome << "\n";
  if (report.verdict) s << "verdict: " << to_string(*report.verdict) << "\n";
  if (report.t_unstable) s << "t_unstable_s: " << text::format_double(*report.t_unstable) << "\n";
  if (report.insecurity_probability) {
    s << "insecurity_probability: " << text::format_double(*report.insecurity_probability) << "\n";
    s << "scenarios: " << report.n_scenarios << "\n";
  }
  if (!report.missing_regions.empty()) {
    s << "missing_regions:";
    for (auto r : report.missing_regions) s << " " << r;
    s << "\n";
  }
  s << "times: ms since " << (report.time_origin.empty() ? "-" : report.time_origin) << "\n";
  s << "stage               count     mean_ms      min_ms      max_ms\n";
  for (auto stage : kStages) {
    std::vector<double> t;
    for (const auto& r : report.rows) {
      if (r.stage == stage) t.push_back(r.t_ms);
    }
    if (t.empty()) continue;
    double sum = 0.0;
    for (double v : t) sum += v;
    char line[128];
    std::snprintf(line, sizeof line, "%-18s %6zu %11.3f %11.3f %11.3f\n", std::string(stage).c_str(), t.size(),
                  sum / static_cast<double>(t.size()), *std::min_element(t.begin(), t.end()),
                  *std::max_element(t.begin(), t.end()));
    s << line;
  }
  if (!report.warnings.empty()) {
    s << "partial report:\n";
    for (const auto& w : report.warnings) s << "  " << w << "\n";
  }
  return s.str();
}

}  // namespace gridedge
