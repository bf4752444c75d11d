// SPDX-License-Identifier: Apache-2.0
//
// The cloud-side computation chained from the pure module functions. Both
// the distributed coordinator and the monolithic reference path call these,
// so the two can be compared bit for bit.
#pragma once

#include <span>

#include "gridedge/dynamics.hpp"
#include "gridedge/sampling.hpp"

namespace gridedge {

/// Power flow, machine initialization, fault variants of `y`, Kron reduction
/// and the transient run.
SimulationResult run_transient(const GridCase& grid_case, const YMatrix& y, const FaultSpec& fault,
                               const SimulationConfig& cfg);

inline SimulationResult run_transient(const GridCase& grid_case, const FaultSpec& fault,
                                      const SimulationConfig& cfg) {
  return run_transient(grid_case, build_ybus(grid_case), fault, cfg);
}

/// Runs every scenario (apply_scenario, then run_transient) on up to
/// `workers` threads and aggregates the weighted verdicts. The outcome list
/// is in scenario order whatever the thread count. A scenario whose power
/// flow diverges counts as Unstable.
SecurityReport assess_scenarios(const GridCase& grid_case, const YMatrix& y, const FaultSpec& fault,
                                const SimulationConfig& cfg, std::span<const Scenario> scenarios,
                                std::span<const double> weights, unsigned workers);

}  // namespace gridedge
