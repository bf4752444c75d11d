// SPDX-License-Identifier: Apache-2.0
// Shared fixtures and generators for the test suites.
#pragma once

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <system_error>

#include "gridedge/grid.hpp"

namespace gridedge::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("gridedge-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::string fixture(const std::string& name) { return std::string(GRIDEDGE_FIXTURE_DIR) + "/" + name; }

/// Random connected case: a random spanning tree plus a few extra branches,
/// random regions, shunts, charging and off-nominal taps. Bus ids are
/// shuffled and non-contiguous so index mapping is exercised.
inline GridCase random_case(std::mt19937_64& rng, int n_buses, int n_regions) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::uniform_int_distribution<int> region_pick(1, n_regions);

  GridCase c;
  std::vector<int> ids(static_cast<std::size_t>(n_buses));
  std::iota(ids.begin(), ids.end(), 1);
  for (auto& id : ids) id = id * 3 + 1;
  std::shuffle(ids.begin(), ids.end(), rng);
  for (int i = 0; i < n_buses; ++i) {
    Bus b;
    b.id = ids[static_cast<std::size_t>(i)];
    b.kind = i == 0 ? BusKind::Slack : (u01(rng) < 0.2 ? BusKind::PV : BusKind::PQ);
    b.v_mag = uniform(0.95, 1.05);
    b.p_load = u01(rng) < 0.5 ? uniform(0.0, 1.0) : 0.0;
    b.q_load = b.p_load * uniform(0.0, 0.5);
    if (u01(rng) < 0.3) b.shunt_g = uniform(0.0, 0.02);
    if (u01(rng) < 0.3) b.shunt_b = uniform(-0.1, 0.2);
    b.region = region_pick(rng);
    c.buses.push_back(b);
  }
  int next_branch = 1;
  auto add_branch = [&](int a, int b) {
    Branch br;
    br.id = next_branch++;
    br.from_bus = c.buses[static_cast<std::size_t>(a)].id;
    br.to_bus = c.buses[static_cast<std::size_t>(b)].id;
    br.r = u01(rng) < 0.2 ? 0.0 : uniform(0.001, 0.05);
    br.x = uniform(0.01, 0.3);
    br.b_charge = u01(rng) < 0.5 ? uniform(0.0, 0.4) : 0.0;
    br.tap = u01(rng) < 0.2 ? uniform(0.9, 1.1) : 1.0;
    br.status = BranchStatus::Closed;
    br.owner_region = region_pick(rng);
    c.branches.push_back(br);
  };
  for (int i = 1; i < n_buses; ++i) add_branch(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  const int extra = std::uniform_int_distribution<int>(0, n_buses / 2)(rng);
  for (int e = 0; e < extra; ++e) {
    int a = std::uniform_int_distribution<int>(0, n_buses - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, n_buses - 1)(rng);
    if (a == b) continue;
    add_branch(a, b);
    if (u01(rng) < 0.3) c.branches.back().status = BranchStatus::Open;
  }
  validate(c);
  return c;
}

/// Random assignment of branches and buses to regions 1..k.
inline Partition random_partition(std::mt19937_64& rng, const GridCase& c, int k) {
  std::uniform_int_distribution<int> pick(1, k);
  Partition p;
  for (int r = 1; r <= k; ++r) p.regions.insert(r);
  for (const auto& br : c.branches) p.branch_region[br.id] = pick(rng);
  for (const auto& b : c.buses) p.bus_region[b.id] = pick(rng);
  return p;
}

}  // namespace gridedge::testing
