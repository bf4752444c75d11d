// SPDX-License-Identifier: Apache-2.0
#include "gridedge/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

SimulationConfig SimulationConfig::for_case(const GridCase& c, double t_end) {
  SimulationConfig cfg;
  cfg.omega_s = 2.0 * std::numbers::pi * c.freq_hz;
  cfg.t_end = t_end;
  return cfg;
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Stable ? "Stable" : "Unstable"; }

Verdict parse_verdict(std::string_view text) {
  if (text == "Stable") return Verdict::Stable;
  if (text == "Unstable") return Verdict::Unstable;
  throw Error(Errc::InvalidArgument, "unknown verdict '" + std::string(text) + "'");
}

Eigen::MatrixXcd kron_eliminate(const Eigen::MatrixXcd& y, std::span<const Eigen::Index> keep) {
  const Eigen::Index n = y.rows();
  if (y.cols() != n) throw Error(Errc::InvalidArgument, "kron_eliminate needs a square matrix");
  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  for (auto k : keep) {
    if (k < 0 || k >= n || kept[static_cast<std::size_t>(k)]) {
      throw Error(Errc::InvalidArgument, "bad keep index " + std::to_string(k));
    }
    kept[static_cast<std::size_t>(k)] = true;
  }
  std::vector<Eigen::Index> elim;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!kept[static_cast<std::size_t>(i)]) elim.push_back(i);
  }
  const auto nk = static_cast<Eigen::Index>(keep.size());
  const auto ne = static_cast<Eigen::Index>(elim.size());
  Eigen::MatrixXcd ykk(nk, nk), yke(nk, ne), yek(ne, nk), yee(ne, ne);
  for (Eigen::Index a = 0; a < nk; ++a) {
    for (Eigen::Index b = 0; b < nk; ++b) ykk(a, b) = y(keep[a], keep[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yke(a, b) = y(keep[a], elim[b]);
  }
  for (Eigen::Index a = 0; a < ne; ++a) {
    for (Eigen::Index b = 0; b < nk; ++b) yek(a, b) = y(elim[a], keep[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = y(elim[a], elim[b]);
  }
  if (ne == 0) return ykk;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(yee);
  if (!lu.isInvertible()) throw Error(Errc::Singular, "eliminated block of the admittance matrix is singular");
  return ykk - yke * lu.solve(yek);
}

Eigen::MatrixXcd kron_reduce(const YMatrix& y, const GridCase& c, const PowerFlowSolution& sol) {
  const auto n = static_cast<Eigen::Index>(y.n);
  const auto m = static_cast<Eigen::Index>(c.generators.size());
  if (y.n != c.buses.size() || sol.v_mag.size() != c.buses.size()) {
    throw Error(Errc::InvalidArgument, "matrix, case and solution sizes disagree");
  }
  Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = y.dense();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = c.buses[static_cast<std::size_t>(i)];
    if (!bus.has_load()) continue;
    const double v2 = sol.v_mag[static_cast<std::size_t>(i)] * sol.v_mag[static_cast<std::size_t>(i)];
    aug(i, i) += Complex(bus.p_load, -bus.q_load) / v2;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index g = 0; g < m; ++g) {
    const auto& gen = c.generators[static_cast<std::size_t>(g)];
    const auto k = static_cast<Eigen::Index>(c.bus_index(gen.bus));
    const Complex yg = 1.0 / Complex(0.0, gen.xd_p);
    const Eigen::Index node = n + g;
    aug(k, k) += yg;
    aug(node, node) += yg;
    aug(k, node) -= yg;
    aug(node, k) -= yg;
    keep.push_back(node);
  }
  return kron_eliminate(aug, keep);
}

ReducedNetwork reduce_network(const FaultVariants& v, const GridCase& c, const PowerFlowSolution& sol) {
  return {kron_reduce(v.pre, c, sol), kron_reduce(v.on, c, sol), kron_reduce(v.post, c, sol)};
}

namespace {

long long switch_step(double t, double dt, const char* what) {
  const double ratio = t / dt;
  const double snapped = std::round(ratio);
  if (std::fabs(snapped * dt - t) > 1e-9) {
    throw Error(Errc::InvalidArgument, std::string(what) + " = " + text::format_double(t) +
                                           " is not a multiple of dt = " + text::format_double(dt));
  }
  return static_cast<long long>(snapped);
}

struct Machines {
  Eigen::VectorXd e, h, d, pm;
};

// Electrical power uses a fixed j-order sum so every run is bitwise repeatable.
void derivative(const Machines& mc, const Eigen::MatrixXcd& y, double omega_s, const Eigen::VectorXd& delta,
                const Eigen::VectorXd& dw, Eigen::VectorXd& d_delta, Eigen::VectorXd& d_dw) {
  const Eigen::Index m = delta.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    double pe = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double a = delta(i) - delta(j);
      pe += mc.e(i) * mc.e(j) * (y(i, j).real() * std::cos(a) + y(i, j).imag() * std::sin(a));
    }
    d_delta(i) = omega_s * dw(i);
    d_dw(i) = (mc.pm(i) - pe - mc.d(i) * dw(i)) / (2.0 * mc.h(i));
  }
}

}  // namespace

SimulationResult simulate_dynamics(const GridCase& c, const ReducedNetwork& net, const FaultSpec& fault,
                                   const SimulationConfig& cfg) {
  if (!(cfg.dt > 0.0 && cfg.dt <= 0.02)) throw Error(Errc::InvalidArgument, "dt must lie in (0, 0.02]");
  if (!(cfg.t_end > 0.0)) throw Error(Errc::InvalidArgument, "t_end must be positive");
  if (cfg.max_points < 3) throw Error(Errc::InvalidArgument, "max_points must be at least 3");
  if (!(fault.t_fault >= 0.0 && fault.t_fault < fault.t_clear)) {
    throw Error(Errc::InvalidArgument, "fault times need 0 <= t_fault < t_clear");
  }
  const auto m = static_cast<Eigen::Index>(c.generators.size());
  for (const auto* y : {&net.pre, &net.on, &net.post}) {
    if (y->rows() != m || y->cols() != m) throw Error(Errc::InvalidArgument, "reduced network size != machine count");
    if (!y->allFinite()) throw Error(Errc::InvalidArgument, "reduced network has non-finite entries");
  }
  const long long k_fault = switch_step(fault.t_fault, cfg.dt, "t_fault");
  const long long k_clear = switch_step(fault.t_clear, cfg.dt, "t_clear");
  const auto steps = static_cast<long long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));

  Machines mc{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  Eigen::VectorXd delta(m), dw = Eigen::VectorXd::Zero(m);
  SimulationResult res;
  double h_total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    mc.e(i) = g.e_mag;
    mc.h(i) = g.h;
    mc.d(i) = g.d;
    mc.pm(i) = g.p_mech;
    delta(i) = g.delta0;
    h_total += g.h;
    res.machine_ids.push_back(g.id);
  }

  auto record = [&](double t) {
    res.times.push_back(t);
    res.delta.emplace_back(delta.data(), delta.data() + m);
    res.omega_dev.emplace_back(dw.data(), dw.data() + m);
  };
  auto spread = [&]() {
    if (m == 0) return 0.0;
    double coi = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) coi += mc.h(i) * delta(i);
    coi /= h_total;
    double lo = delta(0) - coi, hi = lo;
    for (Eigen::Index i = 1; i < m; ++i) {
      lo = std::min(lo, delta(i) - coi);
      hi = std::max(hi, delta(i) - coi);
    }
    return hi - lo;
  };

  const long long stride =
      steps + 1 <= static_cast<long long>(cfg.max_points)
          ? 1
          : (steps + static_cast<long long>(cfg.max_points) - 3) / static_cast<long long>(cfg.max_points - 2);

  Eigen::VectorXd k1d(m), k1w(m), k2d(m), k2w(m), k3d(m), k3w(m), k4d(m), k4w(m);
  record(0.0);
  for (long long k = 0; k < steps; ++k) {
    const Eigen::MatrixXcd& y = k < k_fault ? net.pre : (k < k_clear ? net.on : net.post);
    const double h = cfg.dt;
    derivative(mc, y, cfg.omega_s, delta, dw, k1d, k1w);
    derivative(mc, y, cfg.omega_s, delta + 0.5 * h * k1d, dw + 0.5 * h * k1w, k2d, k2w);
    derivative(mc, y, cfg.omega_s, delta + 0.5 * h * k2d, dw + 0.5 * h * k2w, k3d, k3w);
    derivative(mc, y, cfg.omega_s, delta + h * k3d, dw + h * k3w, k4d, k4w);
    delta += (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    dw += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);

    const double t = static_cast<double>(k + 1) * cfg.dt;
    if (!delta.allFinite() || !dw.allFinite()) {
      throw Error(Errc::NumericBlowup, "non-finite machine state at t = " + text::format_double(t));
    }
    const bool unstable = spread() > cfg.angle_threshold;
    if (unstable || (k + 1) % stride == 0 || k + 1 == steps) record(t);
    if (unstable) {
      res.verdict = Verdict::Unstable;
      res.t_unstable = t;
      break;
    }
  }
  return res;
}

void write_trajectory_csv(std::ostream& out, const SimulationResult& r) {
  out << "time";
  for (int id : r.machine_ids) out << ",delta_" << id;
  for (int id : r.machine_ids) out << ",omega_" << id;
  out << "\n";
  for (std::size_t p = 0; p < r.times.size(); ++p) {
    out << text::format_double(r.times[p]);
    for (double v : r.delta[p]) out << "," << text::format_double(v);
    for (double v : r.omega_dev[p]) out << "," << text::format_double(v);
    out << "\n";
  }
  out << "verdict," << to_string(r.verdict) << ",";
  if (r.t_unstable) out << text::format_double(*r.t_unstable);
  out << "\n";
}

std::string trajectory_csv(const SimulationResult& r) {
  std::ostringstream out;
  write_trajectory_csv(out, r);
  return out.str();
}

SecurityReport assess_run(std::span<const ScenarioOutcome> outcomes) {
  if (outcomes.empty()) throw Error(Errc::InvalidArgument, "no scenario results to assess");
  double total = 0.0, unstable = 0.0;
  for (const auto& o : outcomes) {
    if (!(o.weight >= 0.0)) throw Error(Errc::InvalidArgument, "scenario weights must be nonnegative");
    total += o.weight;
    if (o.verdict == Verdict::Unstable) unstable += o.weight;
  }
  if (!(total > 0.0)) throw Error(Errc::InvalidArgument, "scenario weights sum to zero");
  return {unstable / total, {outcomes.begin(), outcomes.end()}};
}

SecurityReport assess_run(std::span<const std::pair<double, SimulationResult>> results) {
  std::vector<ScenarioOutcome> outcomes;
  int id = 0;
  for (const auto& [w, r] : results) outcomes.push_back({id++, w, r.verdict, r.t_unstable});
  return assess_run(outcomes);
}

std::string security_csv(const SecurityReport& report) {
  std::ostringstream out;
  out << "scenario,weight,verdict,t_unstable\n";
  for (const auto& s : report.scenarios) {
    out << s.scenario_id << "," << text::format_double(s.weight) << "," << to_string(s.verdict) << ",";
    if (s.t_unstable) out << text::format_double(*s.t_unstable);
    out << "\n";
  }
  out << "insecurity_probability," << text::format_double(report.insecurity_probability) << "\n";
  return out.str();
}

}  // namespace gridedge
