// SPDX-License-Identifier: Apache-2.0
//
// Static grid data model and the plain-text case format.
//
// Case file layout (one record per line, comma separated, '#' starts a
// comment, blank lines ignored):
//
//   [meta]
//   base_mva, 100
//   freq_hz, 60
//   [bus]
//   id, kind, v_mag, v_ang, p_load, q_load, shunt_g, shunt_b[, region]
//   [branch]
//   id, from_bus, to_bus, r, x, b_charge, tap, status, owner_region
//   [gen]
//   id, bus, h, d, xd_p, p_mech, e_mag, delta0
//
// kind is one of Slack/PV/PQ, status is Closed/Open, angles are radians and
// every electrical quantity is per-unit on base_mva. A bus without a region
// column belongs to region 1. owner_region 0 means "region of from_bus".
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gridedge {

using BusId = int;
using BranchId = int;
using RegionId = int;

enum class BusKind { Slack, PV, PQ };
enum class BranchStatus { Closed, Open };

struct Bus {
  BusId id = 0;
  BusKind kind = BusKind::PQ;
  double v_mag = 1.0;
  double v_ang = 0.0;
  double p_load = 0.0;
  double q_load = 0.0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
  RegionId region = 1;

  bool has_load() const { return p_load != 0.0 || q_load != 0.0; }
};

struct Branch {
  BranchId id = 0;
  BusId from_bus = 0;
  BusId to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  BranchStatus status = BranchStatus::Closed;
  RegionId owner_region = 0;

  bool closed() const { return status == BranchStatus::Closed; }
};

struct Generator {
  int id = 0;
  BusId bus = 0;
  double h = 0.0;
  double d = 0.0;
  double xd_p = 0.0;
  double p_mech = 0.0;
  double e_mag = 1.0;
  double delta0 = 0.0;
};

struct GridCase {
  double base_mva = 100.0;
  double freq_hz = 60.0;
  std::vector<Bus> buses;  // ascending id after validate()
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  /// Position of a bus in `buses`; throws InvalidCase if absent.
  std::size_t bus_index(BusId id) const;
  bool has_bus(BusId id) const;
  const Bus& bus(BusId id) const;
  Bus& bus(BusId id);
  const Branch* find_branch(BranchId id) const;
  Branch* find_branch(BranchId id);

  std::vector<BusId> bus_ids() const;
  /// Buses carrying a nonzero load, ascending id.
  std::vector<BusId> load_buses() const;
  std::set<BranchId> closed_branch_ids() const;
  std::set<RegionId> regions() const;
};

std::string_view to_string(BusKind kind);
std::string_view to_string(BranchStatus status);
BranchStatus parse_branch_status(std::string_view text);

/// Sorts buses by id and checks every invariant of the model: unique ids, one
/// slack, positive magnitudes, valid branch endpoints and parameters,
/// generator parameters, at most one generator per bus, and connectivity over
/// Closed branches. Throws Error{InvalidCase} on the first violation.
void validate(GridCase& grid_case);

/// True when the Closed branches connect every bus.
bool is_connected(const GridCase& grid_case);

GridCase parse_case(std::istream& in);
GridCase parse_case_text(const std::string& text);
GridCase load_case(const std::string& path);
void write_case(std::ostream& out, const GridCase& grid_case);

/// Branch-to-region and bus-to-region ownership, plus the declared region set
/// (a region may own nothing).
struct Partition {
  std::map<BranchId, RegionId> branch_region;
  std::map<BusId, RegionId> bus_region;
  std::set<RegionId> regions;

  /// Default rule: a branch belongs to its owner_region when set, else to the
  /// region of its from_bus; a bus belongs to the region in the case file.
  static Partition from_case(const GridCase& grid_case);
};

}  // namespace gridedge
