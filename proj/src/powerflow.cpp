// SPDX-License-Identifier: Apache-2.0
#include "gridedge/powerflow.hpp"

#include <cmath>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace {

struct Injections {
  Eigen::VectorXd p, q;
};

Injections compute_injections(const Eigen::MatrixXd& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& v,
                              const Eigen::VectorXd& th) {
  const auto n = v.size();
  Injections s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (g(i, k) == 0.0 && b(i, k) == 0.0) continue;
      const double d = th(i) - th(k);
      const double c = std::cos(d);
      const double sn = std::sin(d);
      s.p(i) += v(i) * v(k) * (g(i, k) * c + b(i, k) * sn);
      s.q(i) += v(i) * v(k) * (g(i, k) * sn - b(i, k) * c);
    }
  }
  return s;
}

}  // namespace

PowerFlowSolution solve_power_flow(const GridCase& c, const PowerFlowOptions& opt) {
  if (!(opt.tol > 0.0) || opt.max_iter < 0) throw Error(Errc::InvalidArgument, "power flow needs tol > 0");
  const Eigen::MatrixXcd ybus = build_ybus(c).dense();
  const Eigen::MatrixXd g = ybus.real();
  const Eigen::MatrixXd b = ybus.imag();
  const auto n = static_cast<Eigen::Index>(c.buses.size());

  Eigen::VectorXd v(n), th(n), p_spec = Eigen::VectorXd::Zero(n), q_spec = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Index> ang_idx, mag_idx;  // unknown angles (PV+PQ), unknown magnitudes (PQ)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = c.buses[static_cast<std::size_t>(i)];
    v(i) = bus.v_mag;
    th(i) = bus.v_ang;
    p_spec(i) = -bus.p_load;
    q_spec(i) = -bus.q_load;
    if (bus.kind != BusKind::Slack) ang_idx.push_back(i);
    if (bus.kind == BusKind::PQ) mag_idx.push_back(i);
  }
  for (const auto& gen : c.generators) p_spec(static_cast<Eigen::Index>(c.bus_index(gen.bus))) += gen.p_mech;

  const auto na = static_cast<Eigen::Index>(ang_idx.size());
  const auto nm = static_cast<Eigen::Index>(mag_idx.size());
  const Eigen::Index dim = na + nm;
  std::vector<Eigen::Index> col_ang(static_cast<std::size_t>(n), -1), col_mag(static_cast<std::size_t>(n), -1);
  for (Eigen::Index r = 0; r < na; ++r) col_ang[static_cast<std::size_t>(ang_idx[r])] = r;
  for (Eigen::Index r = 0; r < nm; ++r) col_mag[static_cast<std::size_t>(mag_idx[r])] = na + r;

  PowerFlowSolution sol;
  for (int iter = 0;; ++iter) {
    const auto s = compute_injections(g, b, v, th);
    Eigen::VectorXd mismatch(dim);
    for (Eigen::Index r = 0; r < na; ++r) mismatch(r) = p_spec(ang_idx[r]) - s.p(ang_idx[r]);
    for (Eigen::Index r = 0; r < nm; ++r) mismatch(na + r) = q_spec(mag_idx[r]) - s.q(mag_idx[r]);
    const double worst = dim == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    if (!std::isfinite(worst)) {
      throw Error(Errc::Divergence, "power flow mismatch became non-finite at iteration " + std::to_string(iter));
    }
    sol.iterations = iter;
    sol.max_mismatch = worst;
    if (worst < opt.tol) break;
    if (iter >= opt.max_iter) {
      throw Error(Errc::Divergence, "no convergence after " + std::to_string(opt.max_iter) +
                                        " iterations, last mismatch " + text::format_double(worst));
    }

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
    auto fill_row = [&](Eigen::Index row, Eigen::Index i, bool active) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const double d = th(i) - th(k);
        const double c = std::cos(d);
        const double sn = std::sin(d);
        double d_th, d_v;
        if (k == i) {
          if (active) {
            d_th = -s.q(i) - b(i, i) * v(i) * v(i);
            d_v = s.p(i) / v(i) + g(i, i) * v(i);
          } else {
            d_th = s.p(i) - g(i, i) * v(i) * v(i);
            d_v = s.q(i) / v(i) - b(i, i) * v(i);
          }
        } else if (active) {
          d_th = v(i) * v(k) * (g(i, k) * sn - b(i, k) * c);
          d_v = v(i) * (g(i, k) * c + b(i, k) * sn);
        } else {
          d_th = -v(i) * v(k) * (g(i, k) * c + b(i, k) * sn);
          d_v = v(i) * (g(i, k) * sn - b(i, k) * c);
        }
        const auto ku = static_cast<std::size_t>(k);
        if (col_ang[ku] >= 0) jac(row, col_ang[ku]) = d_th;
        if (col_mag[ku] >= 0) jac(row, col_mag[ku]) = d_v;
      }
    };
    for (Eigen::Index r = 0; r < na; ++r) fill_row(r, ang_idx[r], true);
    for (Eigen::Index r = 0; r < nm; ++r) fill_row(na + r, mag_idx[r], false);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw Error(Errc::Singular, "singular power-flow Jacobian at iteration " + std::to_string(iter));
    }
    const Eigen::VectorXd dx = lu.solve(mismatch);
    for (Eigen::Index r = 0; r < na; ++r) th(ang_idx[r]) += dx(r);
    for (Eigen::Index r = 0; r < nm; ++r) v(mag_idx[r]) += dx(na + r);
    for (Eigen::Index r = 0; r < nm; ++r) {
      if (!(v(mag_idx[r]) > 0.0) || !std::isfinite(v(mag_idx[r]))) {
        throw Error(Errc::Divergence, "voltage collapsed at iteration " + std::to_string(iter) +
                                          ", last mismatch " + text::format_double(worst));
      }
    }
  }

  sol.v_mag.assign(v.data(), v.data() + n);
  sol.v_ang.assign(th.data(), th.data() + n);
  return sol;
}

std::vector<Complex> bus_injections(const YMatrix& y, const PowerFlowSolution& sol) {
  std::vector<Complex> current(y.n);
  for (const auto& [key, value] : y.entries) {
    current[static_cast<std::size_t>(key.first)] += value * sol.voltage(static_cast<std::size_t>(key.second));
  }
  std::vector<Complex> s(y.n);
  for (std::size_t i = 0; i < y.n; ++i) s[i] = sol.voltage(i) * std::conj(current[i]);
  return s;
}

GridCase initialize_machines(const GridCase& c, const PowerFlowSolution& sol) {
  if (sol.v_mag.size() != c.buses.size()) throw Error(Errc::InvalidArgument, "solution does not match the case");
  GridCase out = c;
  for (std::size_t i = 0; i < out.buses.size(); ++i) {
    out.buses[i].v_mag = sol.v_mag[i];
    out.buses[i].v_ang = sol.v_ang[i];
  }
  const auto s_inj = bus_injections(build_ybus(c), sol);
  for (auto& gen : out.generators) {
    const std::size_t i = c.bus_index(gen.bus);
    if (!(sol.v_mag[i] > 0.0)) {
      throw Error(Errc::InvalidArgument, "generator " + std::to_string(gen.id) + " sits on a bus with v_mag = 0");
    }
    const auto& bus = c.buses[i];
    const Complex s_gen = s_inj[i] + Complex(bus.p_load, bus.q_load);
    const Complex v = sol.voltage(i);
    const Complex current = std::conj(s_gen / v);
    const Complex e = v + Complex(0.0, gen.xd_p) * current;
    gen.e_mag = std::abs(e);
    gen.delta0 = std::arg(e);
    gen.p_mech = s_gen.real();
  }
  return out;
}

}  // namespace gridedge
