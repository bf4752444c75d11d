// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <thread>

#include "gridedge/error.hpp"
#include "gridedge/pipeline.hpp"
#include "test_support.hpp"

using namespace gridedge;

namespace {

struct Prepared {
  GridCase init;
  ReducedNetwork net;
};

Prepared prepare(const std::string& file, const FaultSpec& fault) {
  const auto c = load_case(testing::fixture(file));
  const auto sol = solve_power_flow(c);
  auto init = initialize_machines(c, sol);
  return {init, reduce_network(fault_variants(build_ybus(init), init, fault), init, sol)};
}

FaultSpec never_fault(BusId bus) {
  FaultSpec f;
  f.faulted_bus = bus;
  f.t_fault = 100.0;
  f.t_clear = 100.1;
  return f;
}

// Zero crossings of x(t) - center, linearly interpolated.
std::vector<double> crossings(const SimulationResult& r, auto signal, double center) {
  std::vector<double> out;
  for (std::size_t p = 1; p < r.times.size(); ++p) {
    const double a = signal(p - 1) - center;
    const double b = signal(p) - center;
    if ((a < 0) != (b < 0)) out.push_back(r.times[p - 1] + (r.times[p] - r.times[p - 1]) * a / (a - b));
  }
  return out;
}

// Lossless multi-machine energy function.
double energy(const GridCase& c, const Eigen::MatrixXcd& y, double omega_s, const std::vector<double>& delta,
              const std::vector<double>& dw) {
  double w = 0.0;
  const std::size_t m = delta.size();
  for (std::size_t i = 0; i < m; ++i) {
    const auto& g = c.generators[i];
    w += g.h * dw[i] * dw[i] - g.p_mech * delta[i] / omega_s;
    for (std::size_t j = i + 1; j < m; ++j) {
      w -= g.e_mag * c.generators[j].e_mag * y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).imag() *
           std::cos(delta[i] - delta[j]) / omega_s;
    }
  }
  return w;
}

}  // namespace

TEST_CASE("kron_eliminate") {
  Eigen::MatrixXcd y(2, 2);
  y << Complex(1, -5), Complex(-0.5, 4), Complex(-0.5, 4), Complex(2, -7);

  SUBCASE("nothing eliminated") {
    const std::vector<Eigen::Index> keep{0, 1};
    CHECK(kron_eliminate(y, keep).isApprox(y, 0.0));
  }
  SUBCASE("one node eliminated by hand") {
    const std::vector<Eigen::Index> keep{0};
    const Complex expected = y(0, 0) - y(0, 1) * y(1, 0) / y(1, 1);
    CHECK(std::abs(kron_eliminate(y, keep)(0, 0) - expected) < 1e-14);
  }
  SUBCASE("isolated zero-admittance node is singular") {
    Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(3, 3);
    z.topLeftCorner(2, 2) = y;
    const std::vector<Eigen::Index> keep{0, 1};
    try {
      kron_eliminate(z, keep);
      FAIL("expected singularity");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Singular);
    }
  }
}

TEST_CASE("reduced network reproduces machine outputs at equilibrium") {
  const auto p = prepare("case9.txt", never_fault(7));
  const auto m = static_cast<Eigen::Index>(p.init.generators.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    Complex current{};
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& g = p.init.generators[static_cast<std::size_t>(j)];
      current += p.net.pre(i, j) * std::polar(g.e_mag, g.delta0);
    }
    const auto& g = p.init.generators[static_cast<std::size_t>(i)];
    const double pe = (std::polar(g.e_mag, g.delta0) * std::conj(current)).real();
    CHECK(pe == doctest::Approx(g.p_mech).epsilon(1e-10));
  }
}

TEST_CASE("equilibrium start holds still") {
  const auto fault = never_fault(7);
  const auto p = prepare("case9.txt", fault);
  auto cfg = SimulationConfig::for_case(p.init, 5.0);
  const auto r = simulate_dynamics(p.init, p.net, fault, cfg);
  CHECK(r.verdict == Verdict::Stable);
  double worst = 0.0;
  for (const auto& row : r.delta) {
    for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, std::abs(row[i] - r.delta[0][i]));
  }
  CHECK(worst < 1e-6);
  CHECK(r.times.back() == doctest::Approx(5.0));
}

TEST_CASE("SMIB small-signal frequency") {
  const auto fault = never_fault(2);
  auto p = prepare("smib.txt", fault);
  const double delta_eq = p.init.generators[0].delta0 - p.init.generators[1].delta0;
  const double pmax = p.init.generators[0].e_mag * p.init.generators[1].e_mag * p.net.pre(0, 1).imag();
  const double h = p.init.generators[0].h;
  const double omega_s = 2.0 * std::numbers::pi * 60.0;
  const double omega_n = std::sqrt(omega_s * pmax * std::cos(delta_eq) / (2.0 * h));

  p.init.generators[0].delta0 += 0.01;
  auto cfg = SimulationConfig::for_case(p.init, 5.0);
  const auto r = simulate_dynamics(p.init, p.net, fault, cfg);
  const auto zc = crossings(r, [&](std::size_t k) { return r.delta[k][0] - r.delta[k][1]; }, delta_eq);
  REQUIRE(zc.size() >= 4);
  const double half_periods = static_cast<double>(zc.size() - 1);
  const double measured = std::numbers::pi * half_periods / (zc.back() - zc.front());
  CHECK(std::abs(measured - omega_n) / omega_n < 0.02);
}

TEST_CASE("sustained terminal fault is unstable") {
  FaultSpec fault;
  fault.faulted_bus = 1;
  fault.t_fault = 0.1;
  fault.t_clear = 10.0;
  const auto p = prepare("smib.txt", fault);
  // During the fault the machine is shorted: no transfer, so no decelerating area.
  CHECK(std::abs(p.net.on(0, 1)) < 1e-3 * std::abs(p.net.pre(0, 1)));
  const auto r = simulate_dynamics(p.init, p.net, fault, SimulationConfig::for_case(p.init, 5.0));
  CHECK(r.verdict == Verdict::Unstable);
  REQUIRE(r.t_unstable.has_value());
  CHECK(*r.t_unstable <= 2.0);
  CHECK(r.times.back() == doctest::Approx(*r.t_unstable));
}

TEST_CASE("clearing-time sweep is monotone") {
  bool seen_unstable = false, seen_stable = false;
  for (int k = 1; k <= 10; ++k) {
    FaultSpec fault;
    fault.faulted_bus = 2;
    fault.cleared_branch = 3;
    fault.t_fault = 0.1;
    fault.t_clear = 0.1 + 0.05 * k;
    const auto p = prepare("smib.txt", fault);
    const auto r = simulate_dynamics(p.init, p.net, fault, SimulationConfig::for_case(p.init, 3.0));
    if (r.verdict == Verdict::Unstable) seen_unstable = true;
    if (r.verdict == Verdict::Stable) {
      CHECK_FALSE(seen_unstable);
      seen_stable = true;
    }
  }
  CHECK(seen_stable);
  CHECK(seen_unstable);
}

TEST_CASE("lossless SMIB conserves energy") {
  const auto fault = never_fault(2);
  auto p = prepare("smib.txt", fault);
  p.init.generators[0].delta0 += 0.3;
  auto cfg = SimulationConfig::for_case(p.init, 5.0);
  const auto r = simulate_dynamics(p.init, p.net, fault, cfg);
  const double w0 = energy(p.init, p.net.pre, cfg.omega_s, r.delta[0], r.omega_dev[0]);
  double kinetic = 0.0, drift = 0.0;
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    kinetic = std::max(kinetic, p.init.generators[0].h * r.omega_dev[k][0] * r.omega_dev[k][0]);
    drift = std::max(drift, std::abs(energy(p.init, p.net.pre, cfg.omega_s, r.delta[k], r.omega_dev[k]) - w0));
  }
  CHECK(kinetic > 0.0);
  CHECK(drift < 1e-3 * kinetic);
}

TEST_CASE("RK4 step halving converges at fourth order") {
  const auto fault = never_fault(2);
  auto p = prepare("smib.txt", fault);
  p.init.generators[0].delta0 += 0.3;
  auto final_angle = [&](double dt) {
    auto cfg = SimulationConfig::for_case(p.init, 1.0);
    cfg.dt = dt;
    return simulate_dynamics(p.init, p.net, fault, cfg).delta.back()[0];
  };
  const double a = final_angle(0.02), b = final_angle(0.01), c = final_angle(0.005);
  CHECK(std::abs(a - b) / std::abs(b - c) >= 8.0);
}

TEST_CASE("switching times must sit on the step grid") {
  FaultSpec fault;
  fault.faulted_bus = 2;
  fault.t_fault = 0.1;
  fault.t_clear = 0.1234;
  const auto p = prepare("smib.txt", fault);
  CHECK_THROWS_AS(simulate_dynamics(p.init, p.net, fault, SimulationConfig::for_case(p.init, 1.0)), Error);
  auto cfg = SimulationConfig::for_case(p.init, 1.0);
  cfg.dt = 0.05;
  fault.t_clear = 0.2;
  CHECK_THROWS_AS(simulate_dynamics(p.init, p.net, fault, cfg), Error);
}

TEST_CASE("trajectories are decimated to the point budget") {
  const auto fault = never_fault(2);
  const auto p = prepare("smib.txt", fault);
  auto cfg = SimulationConfig::for_case(p.init, 60.0);
  cfg.dt = 0.001;
  const auto r = simulate_dynamics(p.init, p.net, fault, cfg);
  CHECK(r.times.size() <= 5000);
  CHECK(r.times.front() == 0.0);
  CHECK(r.times.back() == doctest::Approx(60.0));
}

TEST_CASE("runs are bitwise repeatable under concurrency") {
  FaultSpec fault;
  fault.faulted_bus = 7;
  fault.cleared_branch = 4;
  fault.t_fault = 0.1;
  fault.t_clear = 0.2;
  const auto c = load_case(testing::fixture("case9.txt"));
  const auto cfg = SimulationConfig::for_case(c, 2.0);
  const auto ref = trajectory_csv(run_transient(c, fault, cfg));
  std::vector<std::string> out(6);
  {
    std::vector<std::jthread> pool;
    for (auto& slot : out) pool.emplace_back([&] { slot = trajectory_csv(run_transient(c, fault, cfg)); });
  }
  for (const auto& s : out) CHECK(s == ref);
}

TEST_CASE("assess_run") {
  std::vector<ScenarioOutcome> all_stable{{0, 0.5, Verdict::Stable, {}}, {1, 0.5, Verdict::Stable, {}}};
  CHECK(assess_run(all_stable).insecurity_probability == 0.0);
  std::vector<ScenarioOutcome> all_unstable{{0, 0.2, Verdict::Unstable, 1.0}, {1, 0.8, Verdict::Unstable, 1.2}};
  CHECK(assess_run(all_unstable).insecurity_probability == 1.0);
  std::vector<ScenarioOutcome> mixed{{0, 0.7, Verdict::Stable, {}}, {1, 0.3, Verdict::Unstable, 0.9}};
  CHECK(assess_run(mixed).insecurity_probability == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(assess_run(std::span<const ScenarioOutcome>{}), Error);
  std::vector<ScenarioOutcome> negative{{0, -1.0, Verdict::Stable, {}}};
  CHECK_THROWS_AS(assess_run(negative), Error);
}
