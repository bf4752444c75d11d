// SPDX-License-Identifier: Apache-2.0
#include "gridedge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "gridedge/error.hpp"

namespace gridedge {

SimulationResult run_transient(const GridCase& c, const YMatrix& y, const FaultSpec& fault,
                               const SimulationConfig& cfg) {
  const auto sol = solve_power_flow(c);
  const auto init = initialize_machines(c, sol);
  const auto variants = fault_variants(y, init, fault);
  return simulate_dynamics(init, reduce_network(variants, init, sol), fault, cfg);
}

SecurityReport assess_scenarios(const GridCase& c, const YMatrix& y, const FaultSpec& fault,
                                const SimulationConfig& cfg, std::span<const Scenario> scenarios,
                                std::span<const double> weights, unsigned workers) {
  if (scenarios.size() != weights.size()) throw Error(Errc::InvalidArgument, "one weight per scenario required");
  std::vector<ScenarioOutcome> outcomes(scenarios.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mu;
  std::exception_ptr failure;
  auto run_slice = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      auto& out = outcomes[i];
      out.scenario_id = scenarios[i].id;
      out.weight = weights[i];
      try {
        const auto r = run_transient(apply_scenario(c, scenarios[i]), y, fault, cfg);
        out.verdict = r.verdict;
        out.t_unstable = r.t_unstable;
      } catch (const Error& e) {
        if (e.code() != Errc::Divergence && e.code() != Errc::Singular && e.code() != Errc::NumericBlowup) throw;
        out.verdict = Verdict::Unstable;
        out.t_unstable = 0.0;
      }
    }
  };
  auto work = [&] {
    try {
      run_slice();
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = scenarios.size();
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(scenarios.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return assess_run(outcomes);
}

}  // namespace gridedge
