// SPDX-License-Identifier: Apache-2.0
#include "gridedge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "gridedge/error.hpp"

namespace gridedge {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Xoshiro256::below(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::InvalidArgument, "empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

ForecastSpec ForecastSpec::uniform_for(std::vector<BusId> load_buses, ErrorModel model) {
  ForecastSpec spec;
  spec.errors.assign(load_buses.size(), model);
  spec.load_buses = std::move(load_buses);
  return spec;
}

void ForecastSpec::validate() const {
  if (load_buses.size() != errors.size()) throw Error(Errc::InvalidArgument, "one error model per load bus required");
  if (!std::is_sorted(load_buses.begin(), load_buses.end()) ||
      std::adjacent_find(load_buses.begin(), load_buses.end()) != load_buses.end()) {
    throw Error(Errc::InvalidArgument, "forecast load buses must be strictly ascending");
  }
  for (const auto& e : errors) {
    if (e.dist == ErrorDistribution::Gaussian) {
      if (!(e.param > 0.0)) throw Error(Errc::InvalidArgument, "Gaussian sigma must be positive");
      if (!(e.truncation > 0.0) || !std::isfinite(e.truncation)) {
        throw Error(Errc::InvalidArgument, "truncation bound must be finite and positive");
      }
    } else if (!(e.param >= 0.0) || !std::isfinite(e.param)) {
      throw Error(Errc::InvalidArgument, "Uniform half width must be finite and nonnegative");
    }
  }
}

std::vector<Scenario> draw_samples(const ForecastSpec& spec, std::size_t n_raw, std::uint64_t seed) {
  spec.validate();
  if (n_raw < 1) throw Error(Errc::InvalidArgument, "n_raw must be at least 1");
  const std::size_t dims = spec.errors.size();
  std::vector<Scenario> out(n_raw);
  for (std::size_t i = 0; i < n_raw; ++i) {
    out[i].id = static_cast<int>(i);
    out[i].seed = seed;
    out[i].multipliers.resize(dims);
  }
  Xoshiro256 rng(seed);
  const boost::math::normal_distribution<double> unit;
  std::vector<std::size_t> strata(n_raw);
  for (std::size_t d = 0; d < dims; ++d) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    for (std::size_t i = n_raw; i > 1; --i) std::swap(strata[i - 1], strata[rng.below(i)]);
    const auto& model = spec.errors[d];
    for (std::size_t i = 0; i < n_raw; ++i) {
      const double u = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n_raw);
      double eps = 0.0;
      if (model.dist == ErrorDistribution::Gaussian) {
        const double lo = boost::math::cdf(unit, -model.truncation);
        const double hi = boost::math::cdf(unit, model.truncation);
        const double p = std::clamp(lo + u * (hi - lo), lo, hi);
        eps = model.param * boost::math::quantile(unit, p);
      } else {
        eps = model.param * (2.0 * u - 1.0);
      }
      out[i].multipliers[d] = std::max(1.0 + eps, kMinMultiplier);
    }
  }
  return out;
}

ScenarioSet reduce_scenarios(std::span<const Scenario> samples, std::size_t k, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (k < 1 || k > n) throw Error(Errc::InvalidArgument, "need 1 <= k <= number of samples");
  const std::size_t dims = samples.front().multipliers.size();
  for (const auto& s : samples) {
    if (s.multipliers.size() != dims) throw Error(Errc::InvalidArgument, "samples have different dimensions");
  }
  auto point = [&](std::size_t i) -> const std::vector<double>& { return samples[i].multipliers; };

  Xoshiro256 rng(seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(point(rng.below(n)));
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(point(i), centers[0]);
  while (centers.size() < k) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (nearest[i] > nearest[far]) far = i;
    }
    centers.push_back(point(far));
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(point(i), centers.back()));
  }

  std::vector<std::size_t> assign(n, 0);
  auto assign_all = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(point(i), centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(point(i), centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed = changed || assign[i] != best;
      assign[i] = best;
    }
    return changed;
  };
  assign_all();
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dims; ++d) sums[assign[i]][d] += point(i)[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dims; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    if (!assign_all()) break;
  }

  ScenarioSet set;
  set.n_raw = n;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t count = 0;
    std::size_t rep = n;
    double rep_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] != c) continue;
      ++count;
      const double d = squared_distance(point(i), centers[c]);
      if (rep == n || d < rep_d) {
        rep = i;
        rep_d = d;
      }
    }
    if (count == 0) continue;
    set.representatives.push_back(samples[rep]);
    set.weights.push_back(static_cast<double>(count) / static_cast<double>(n));
  }
  return set;
}

GridCase apply_scenario(const GridCase& c, const Scenario& s) {
  const auto loads = c.load_buses();
  if (loads.size() != s.multipliers.size()) {
    throw Error(Errc::InvalidArgument, "scenario has " + std::to_string(s.multipliers.size()) +
                                           " multipliers but the case has " + std::to_string(loads.size()) + " loads");
  }
  GridCase out = c;
  double old_total = 0.0, new_total = 0.0;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    auto& bus = out.bus(loads[i]);
    old_total += bus.p_load;
    bus.p_load *= s.multipliers[i];
    bus.q_load *= s.multipliers[i];
    new_total += bus.p_load;
  }
  if (old_total != 0.0) {
    const double ratio = new_total / old_total;
    for (auto& g : out.generators) g.p_mech *= ratio;
  }
  return out;
}

Scenario expand_scenario(const Scenario& partial, std::span<const BusId> partial_buses,
                         std::span<const BusId> all_load_buses) {
  if (partial.multipliers.size() != partial_buses.size()) {
    throw Error(Errc::InvalidArgument, "scenario and bus list sizes differ");
  }
  Scenario out;
  out.id = partial.id;
  out.seed = partial.seed;
  out.multipliers.assign(all_load_buses.size(), 1.0);
  for (std::size_t i = 0; i < partial_buses.size(); ++i) {
    auto it = std::lower_bound(all_load_buses.begin(), all_load_buses.end(), partial_buses[i]);
    if (it == all_load_buses.end() || *it != partial_buses[i]) {
      throw Error(Errc::InvalidArgument, "bus " + std::to_string(partial_buses[i]) + " carries no load");
    }
    out.multipliers[static_cast<std::size_t>(it - all_load_buses.begin())] = partial.multipliers[i];
  }
  return out;
}

}  // namespace gridedge
