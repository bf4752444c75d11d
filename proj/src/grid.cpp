// SPDX-License-Identifier: Apache-2.0
#include "gridedge/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace {

[[noreturn]] void bad_case(const std::string& what) { throw Error(Errc::InvalidCase, what); }

BusKind parse_kind(std::string_view s) {
  if (s == "Slack") return BusKind::Slack;
  if (s == "PV") return BusKind::PV;
  if (s == "PQ") return BusKind::PQ;
  bad_case("unknown bus kind '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack: return "Slack";
    case BusKind::PV: return "PV";
    case BusKind::PQ: return "PQ";
  }
  return "?";
}

std::string_view to_string(BranchStatus status) {
  return status == BranchStatus::Closed ? "Closed" : "Open";
}

BranchStatus parse_branch_status(std::string_view text) {
  if (text == "Closed" || text == "closed") return BranchStatus::Closed;
  if (text == "Open" || text == "open") return BranchStatus::Open;
  throw Error(Errc::InvalidArgument, "unknown branch status '" + std::string(text) + "'");
}

std::size_t GridCase::bus_index(BusId id) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), id,
                             [](const Bus& b, BusId v) { return b.id < v; });
  if (it == buses.end() || it->id != id) bad_case("no bus " + std::to_string(id));
  return static_cast<std::size_t>(it - buses.begin());
}

bool GridCase::has_bus(BusId id) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), id,
                             [](const Bus& b, BusId v) { return b.id < v; });
  return it != buses.end() && it->id == id;
}

const Bus& GridCase::bus(BusId id) const { return buses[bus_index(id)]; }
Bus& GridCase::bus(BusId id) { return buses[bus_index(id)]; }

const Branch* GridCase::find_branch(BranchId id) const {
  for (const auto& br : branches) {
    if (br.id == id) return &br;
  }
  return nullptr;
}

Branch* GridCase::find_branch(BranchId id) {
  return const_cast<Branch*>(std::as_const(*this).find_branch(id));
}

std::vector<BusId> GridCase::bus_ids() const {
  std::vector<BusId> ids;
  ids.reserve(buses.size());
  for (const auto& b : buses) ids.push_back(b.id);
  return ids;
}

std::vector<BusId> GridCase::load_buses() const {
  std::vector<BusId> ids;
  for (const auto& b : buses) {
    if (b.has_load()) ids.push_back(b.id);
  }
  return ids;
}

std::set<BranchId> GridCase::closed_branch_ids() const {
  std::set<BranchId> ids;
  for (const auto& br : branches) {
    if (br.closed()) ids.insert(br.id);
  }
  return ids;
}

std::set<RegionId> GridCase::regions() const {
  std::set<RegionId> out;
  for (const auto& b : buses) out.insert(b.region);
  for (const auto& br : branches) {
    if (br.owner_region > 0) out.insert(br.owner_region);
  }
  return out;
}

bool is_connected(const GridCase& grid_case) {
  const std::size_t n = grid_case.buses.size();
  if (n == 0) return true;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::size_t components = n;
  for (const auto& br : grid_case.branches) {
    if (!br.closed()) continue;
    auto a = find(grid_case.bus_index(br.from_bus));
    auto b = find(grid_case.bus_index(br.to_bus));
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

void validate(GridCase& c) {
  if (!(c.base_mva > 0.0)) bad_case("base_mva must be positive");
  if (!(c.freq_hz > 0.0)) bad_case("freq_hz must be positive");
  if (c.buses.empty()) bad_case("case has no buses");
  std::sort(c.buses.begin(), c.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });

  int slack = 0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const auto& b = c.buses[i];
    if (b.id < 1) bad_case("bus id must be >= 1");
    if (i > 0 && c.buses[i - 1].id == b.id) bad_case("duplicate bus id " + std::to_string(b.id));
    if (!(b.v_mag > 0.0)) bad_case("bus " + std::to_string(b.id) + " has v_mag <= 0");
    if (b.kind == BusKind::Slack) ++slack;
  }
  if (slack != 1) bad_case("case needs exactly one Slack bus, found " + std::to_string(slack));

  std::set<BranchId> branch_ids;
  for (const auto& br : c.branches) {
    const std::string tag = "branch " + std::to_string(br.id);
    if (!branch_ids.insert(br.id).second) bad_case("duplicate " + tag);
    if (!c.has_bus(br.from_bus) || !c.has_bus(br.to_bus)) bad_case(tag + " references a missing bus");
    if (br.from_bus == br.to_bus) bad_case(tag + " is a self loop");
    if (br.r == 0.0 && br.x == 0.0) throw Error(Errc::DegenerateBranch, tag + " has r = x = 0");
    if (!(br.tap > 0.0)) bad_case(tag + " has tap <= 0");
    if (br.owner_region < 0) bad_case(tag + " has a negative owner_region");
  }

  std::set<int> gen_ids;
  std::set<BusId> gen_buses;
  for (const auto& g : c.generators) {
    const std::string tag = "generator " + std::to_string(g.id);
    if (!gen_ids.insert(g.id).second) bad_case("duplicate " + tag);
    if (!c.has_bus(g.bus)) bad_case(tag + " references a missing bus");
    if (!gen_buses.insert(g.bus).second) bad_case("more than one generator on bus " + std::to_string(g.bus));
    if (!(g.h > 0.0) || !(g.xd_p > 0.0) || !(g.e_mag > 0.0)) {
      bad_case(tag + " needs h > 0, xd_p > 0, e_mag > 0");
    }
  }

  if (!is_connected(c)) bad_case("Closed branches do not connect every bus");
}

GridCase parse_case(std::istream& in) {
  GridCase c;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      section = std::string(body);
      continue;
    }
    const auto f = text::split(body, ',');
    auto need = [&](std::size_t lo, std::size_t hi) {
      if (f.size() < lo || f.size() > hi) {
        bad_case("line " + std::to_string(lineno) + ": expected " + std::to_string(lo) +
                 (lo == hi ? "" : "-" + std::to_string(hi)) + " fields in " + section);
      }
    };
    try {
      if (section == "[meta]") {
        need(2, 2);
        if (f[0] == "base_mva") {
          c.base_mva = text::parse_double(f[1]);
        } else if (f[0] == "freq_hz") {
          c.freq_hz = text::parse_double(f[1]);
        } else {
          bad_case("line " + std::to_string(lineno) + ": unknown meta key '" + f[0] + "'");
        }
      } else if (section == "[bus]") {
        need(8, 9);
        Bus b;
        b.id = static_cast<BusId>(text::parse_int(f[0]));
        b.kind = parse_kind(f[1]);
        b.v_mag = text::parse_double(f[2]);
        b.v_ang = text::parse_double(f[3]);
        b.p_load = text::parse_double(f[4]);
        b.q_load = text::parse_double(f[5]);
        b.shunt_g = text::parse_double(f[6]);
        b.shunt_b = text::parse_double(f[7]);
        if (f.size() == 9) b.region = static_cast<RegionId>(text::parse_int(f[8]));
        c.buses.push_back(b);
      } else if (section == "[branch]") {
        need(9, 9);
        Branch br;
        br.id = static_cast<BranchId>(text::parse_int(f[0]));
        br.from_bus = static_cast<BusId>(text::parse_int(f[1]));
        br.to_bus = static_cast<BusId>(text::parse_int(f[2]));
        br.r = text::parse_double(f[3]);
        br.x = text::parse_double(f[4]);
        br.b_charge = text::parse_double(f[5]);
        br.tap = text::parse_double(f[6]);
        br.status = parse_branch_status(f[7]);
        br.owner_region = static_cast<RegionId>(text::parse_int(f[8]));
        c.branches.push_back(br);
      } else if (section == "[gen]") {
        need(8, 8);
        Generator g;
        g.id = static_cast<int>(text::parse_int(f[0]));
        g.bus = static_cast<BusId>(text::parse_int(f[1]));
        g.h = text::parse_double(f[2]);
        g.d = text::parse_double(f[3]);
        g.xd_p = text::parse_double(f[4]);
        g.p_mech = text::parse_double(f[5]);
        g.e_mag = text::parse_double(f[6]);
        g.delta0 = text::parse_double(f[7]);
        c.generators.push_back(g);
      } else {
        bad_case("line " + std::to_string(lineno) + ": record outside a known section");
      }
    } catch (const Error& e) {
      if (e.code() != Errc::InvalidArgument) throw;
      bad_case("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate(c);
  return c;
}

GridCase parse_case_text(const std::string& text) {
  std::istringstream in(text);
  return parse_case(in);
}

GridCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::NotFound, "cannot open case file " + path);
  return parse_case(in);
}

void write_case(std::ostream& out, const GridCase& c) {
  using text::format_double;
  out << "[meta]\nbase_mva, " << format_double(c.base_mva) << "\nfreq_hz, " << format_double(c.freq_hz)
      << "\n[bus]\n";
  for (const auto& b : c.buses) {
    out << b.id << ", " << to_string(b.kind) << ", " << format_double(b.v_mag) << ", " << format_double(b.v_ang)
        << ", " << format_double(b.p_load) << ", " << format_double(b.q_load) << ", " << format_double(b.shunt_g)
        << ", " << format_double(b.shunt_b) << ", " << b.region << "\n";
  }
  out << "[branch]\n";
  for (const auto& br : c.branches) {
    out << br.id << ", " << br.from_bus << ", " << br.to_bus << ", " << format_double(br.r) << ", "
        << format_double(br.x) << ", " << format_double(br.b_charge) << ", " << format_double(br.tap) << ", "
        << to_string(br.status) << ", " << br.owner_region << "\n";
  }
  out << "[gen]\n";
  for (const auto& g : c.generators) {
    out << g.id << ", " << g.bus << ", " << format_double(g.h) << ", " << format_double(g.d) << ", "
        << format_double(g.xd_p) << ", " << format_double(g.p_mech) << ", " << format_double(g.e_mag) << ", "
        << format_double(g.delta0) << "\n";
  }
}

Partition Partition::from_case(const GridCase& c) {
  Partition p;
  for (const auto& b : c.buses) {
    p.bus_region[b.id] = b.region;
    p.regions.insert(b.region);
  }
  for (const auto& br : c.branches) {
    const RegionId r = br.owner_region > 0 ? br.owner_region : c.bus(br.from_bus).region;
    p.branch_region[br.id] = r;
    p.regions.insert(r);
  }
  return p;
}

}  // namespace gridedge
