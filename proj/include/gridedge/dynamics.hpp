// SPDX-License-Identifier: Apache-2.0
//
// Classical-model transient simulation. Machines are constant EMFs behind
// transient reactance, loads are constant impedances, and the network is
// Kron-reduced to the generator internal nodes for each fault stage.
#pragma once

#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridedge/grid.hpp"
#include "gridedge/powerflow.hpp"
#include "gridedge/ybus.hpp"

namespace gridedge {

struct SimulationConfig {
  double dt = 0.005;
  double t_end = 5.0;
  double omega_s = 2.0 * std::numbers::pi * 60.0;
  double angle_threshold = std::numbers::pi;
  std::size_t max_points = 5000;

  static SimulationConfig for_case(const GridCase& grid_case, double t_end = 5.0);
};

struct ReducedNetwork {
  Eigen::MatrixXcd pre, on, post;
};

enum class Verdict { Stable, Unstable };
std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view text);

struct SimulationResult {
  std::vector<int> machine_ids;
  std::vector<double> times;
  std::vector<std::vector<double>> delta;      // [point][machine], rad
  std::vector<std::vector<double>> omega_dev;  // [point][machine], p.u.
  Verdict verdict = Verdict::Stable;
  std::optional<double> t_unstable;
};

/// Y_kk - Y_ke Y_ee^-1 Y_ek, keeping the listed indices in the given order.
Eigen::MatrixXcd kron_eliminate(const Eigen::MatrixXcd& y, std::span<const Eigen::Index> keep);

/// Adds constant-impedance loads (p - jq)/|V|^2 and one internal node per
/// generator behind 1/(j xd'), then eliminates every network bus.
Eigen::MatrixXcd kron_reduce(const YMatrix& y, const GridCase& grid_case, const PowerFlowSolution& sol);

ReducedNetwork reduce_network(const FaultVariants& variants, const GridCase& grid_case,
                              const PowerFlowSolution& sol);

/// Fixed-step RK4 on
///   d(delta_i)/dt = omega_s * dw_i
///   2 H_i d(dw_i)/dt = Pm_i - Pe_i - D_i dw_i
/// switching the reduced network at t_fault and t_clear. Integration stops at
/// the first instant the center-of-inertia angle spread exceeds
/// angle_threshold. Throws NumericBlowup on a non-finite state and
/// InvalidArgument when dt does not divide the switching times.
SimulationResult simulate_dynamics(const GridCase& grid_case, const ReducedNetwork& net, const FaultSpec& fault,
                                   const SimulationConfig& cfg);

/// Trajectory CSV: header `time,delta_<id>...,omega_<id>...`, one row per
/// stored point, then `verdict,<Stable|Unstable>,<t_unstable or empty>`.
void write_trajectory_csv(std::ostream& out, const SimulationResult& result);
std::string trajectory_csv(const SimulationResult& result);

struct ScenarioOutcome {
  int scenario_id = 0;
  double weight = 0.0;
  Verdict verdict = Verdict::Stable;
  std::optional<double> t_unstable;
};

struct SecurityReport {
  double insecurity_probability = 0.0;
  std::vector<ScenarioOutcome> scenarios;
};

/// Weighted share of Unstable outcomes.
SecurityReport assess_run(std::span<const ScenarioOutcome> outcomes);
SecurityReport assess_run(std::span<const std::pair<double, SimulationResult>> results);

/// `scenario,weight,verdict,t_unstable` rows followed by
/// `insecurity_probability,<p>`.
std::string security_csv(const SecurityReport& report);

}  // namespace gridedge
