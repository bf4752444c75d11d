// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "gridedge/grid.hpp"
#include "gridedge/ybus.hpp"

namespace gridedge {

struct PowerFlowSolution {
  std::vector<double> v_mag;  // per bus, ascending id
  std::vector<double> v_ang;
  int iterations = 0;
  double max_mismatch = 0.0;

  Complex voltage(std::size_t i) const { return std::polar(v_mag[i], v_ang[i]); }
};

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

/// Polar Newton-Raphson with an analytic Jacobian, warm-started from the
/// voltages stored in the case. Generator p_mech is the active-power setpoint
/// of its bus; reactive output is unbounded. Throws Divergence (message
/// carries the last mismatch) or Singular.
PowerFlowSolution solve_power_flow(const GridCase& grid_case, const PowerFlowOptions& options = {});

/// Complex power injected into the network at every bus, S = V conj(Y V).
std::vector<Complex> bus_injections(const YMatrix& y, const PowerFlowSolution& sol);

/// Writes the solved voltages into the buses and sets each classical machine
/// to E = V + j xd' I with p_mech equal to its electrical output, so the
/// returned case starts at equilibrium.
GridCase initialize_machines(const GridCase& grid_case, const PowerFlowSolution& sol);

}  // namespace gridedge
