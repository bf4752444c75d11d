// SPDX-License-Identifier: Apache-2.0
//
// Stage timings and verdicts of one run, rebuilt from node logs and the
// object store. Column meanings are documented in docs/REPORTS.md.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gridedge/dynamics.hpp"
#include "gridedge/grid.hpp"

namespace gridedge {

/// Pipeline order; rows sort by stage in this order.
inline constexpr std::array<std::string_view, 7> kStages = {
    "ue_send", "edge_recv", "edge_compute_done", "store_put_done", "barrier_done", "sim_done", "result_recv"};

struct StageRow {
  std::string run_id;
  std::string stage;
  std::string node;
  std::string seq;  // "<ue>/<seq>" for UE reports, the store key for puts
  double t_ms = 0.0;
};

struct RunReport {
  std::string run_id;
  std::vector<StageRow> rows;
  std::string outcome;  // Completed, TimedOut, Failed or Unknown
  std::optional<Verdict> verdict;
  std::optional<double> t_unstable;
  std::optional<double> insecurity_probability;
  std::size_t n_scenarios = 0;
  std::vector<RegionId> missing_regions;
  std::vector<std::string> warnings;  // non-empty: partial report
  std::string time_origin;            // event the t_ms column is measured from
};

/// Reads every `*.log` under `log_dir`. Throws NotFound when neither the
/// logs nor the store mention `run_id`.
RunReport build_report(const std::string& run_id, const std::string& log_dir, const std::string& store_root);

std::string report_csv(const RunReport& report);
std::string report_summary(const RunReport& report);

}  // namespace gridedge
