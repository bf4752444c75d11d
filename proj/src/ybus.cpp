// SPDX-License-Identifier: Apache-2.0
#include "gridedge/ybus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gridedge/error.hpp"

namespace gridedge {

// Shewchuk's non-overlapping partials followed by a round-half-even fixup of
// the final term, as in Python's math.fsum.
double exact_sum(std::span<const double> values) {
  std::vector<double> partials;
  for (double x : values) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < partials.size(); ++j) {
      double y = partials[j];
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[kept++] = lo;
      x = hi;
    }
    partials.resize(kept);
    partials.push_back(x);
  }

  double hi = 0.0;
  std::size_t n = partials.size();
  if (n > 0) {
    hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
  }
  return hi == 0.0 ? 0.0 : hi;
}

Complex exact_sum(std::span<const Complex> values) {
  std::vector<double> re, im;
  re.reserve(values.size());
  im.reserve(values.size());
  for (const auto& v : values) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  return {exact_sum(re), exact_sum(im)};
}

Complex YMatrix::at(std::size_t row, std::size_t col) const {
  auto it = entries.find({static_cast<int>(row), static_cast<int>(col)});
  return it == entries.end() ? Complex{} : it->second;
}

Eigen::MatrixXcd YMatrix::dense() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [key, value] : entries) m(key.first, key.second) = value;
  return m;
}

bool bitwise_equal(const YMatrix& a, const YMatrix& b) {
  if (a.n != b.n || a.bus_ids != b.bus_ids || a.entries.size() != b.entries.size()) return false;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  for (; ia != a.entries.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (std::memcmp(&ia->second, &ib->second, sizeof(Complex)) != 0) return false;
  }
  return true;
}

BranchStamp branch_stamp(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0) {
    throw Error(Errc::DegenerateBranch, "branch " + std::to_string(br.id) + " has r = x = 0");
  }
  const Complex y = 1.0 / Complex(br.r, br.x);
  const Complex half_charge(0.0, br.b_charge / 2.0);
  BranchStamp s;
  s.ff = y / (br.tap * br.tap) + half_charge;
  s.tt = y + half_charge;
  s.ft = -y / br.tap;
  s.tf = s.ft;
  return s;
}

namespace {

void stamp_branch(StampTerms& terms, const GridCase& c, const Branch& br) {
  const auto s = branch_stamp(br);
  const int f = static_cast<int>(c.bus_index(br.from_bus));
  const int t = static_cast<int>(c.bus_index(br.to_bus));
  terms[{f, f}].push_back(s.ff);
  terms[{f, t}].push_back(s.ft);
  terms[{t, f}].push_back(s.tf);
  terms[{t, t}].push_back(s.tt);
}

void stamp_shunt(StampTerms& terms, const GridCase& c, const Bus& b) {
  if (b.shunt_g == 0.0 && b.shunt_b == 0.0) return;
  const int i = static_cast<int>(c.bus_index(b.id));
  terms[{i, i}].emplace_back(b.shunt_g, b.shunt_b);
}

YMatrix finalize(std::size_t n, std::vector<BusId> bus_ids, const StampTerms& terms) {
  YMatrix y;
  y.n = n;
  y.bus_ids = std::move(bus_ids);
  for (const auto& [key, values] : terms) y.entries.emplace(key, exact_sum(values));
  return y;
}

}  // namespace

YMatrix build_ybus(const GridCase& c) {
  StampTerms terms;
  for (const auto& br : c.branches) {
    if (br.closed()) stamp_branch(terms, c, br);
  }
  for (const auto& b : c.buses) stamp_shunt(terms, c, b);
  return finalize(c.buses.size(), c.bus_ids(), terms);
}

YMatrix PartialAdmittance::summed() const { return finalize(n, bus_ids, terms); }

PartialAdmittance build_partial(const GridCase& c, RegionId region, const Partition& partition) {
  if (!partition.regions.contains(region)) {
    throw Error(Errc::UnknownRegion, "region " + std::to_string(region) + " is not part of the partition");
  }
  PartialAdmittance part;
  part.region = region;
  part.n = c.buses.size();
  part.bus_ids = c.bus_ids();
  for (const auto& br : c.branches) {
    if (!br.closed()) continue;
    auto it = partition.branch_region.find(br.id);
    if (it == partition.branch_region.end()) {
      throw Error(Errc::IncompleteCoverage, "partition does not assign branch " + std::to_string(br.id));
    }
    if (it->second != region) continue;
    stamp_branch(part.terms, c, br);
    part.branch_ids.insert(br.id);
  }
  for (const auto& b : c.buses) {
    auto it = partition.bus_region.find(b.id);
    if (it == partition.bus_region.end()) {
      throw Error(Errc::IncompleteCoverage, "partition does not assign bus " + std::to_string(b.id));
    }
    if (it->second != region) continue;
    part.owned_buses.insert(b.id);
    stamp_shunt(part.terms, c, b);
  }
  return part;
}

YMatrix merge_partials(std::span<const PartialAdmittance> parts, const std::set<BranchId>& expected_branches) {
  if (parts.empty()) throw Error(Errc::IncompleteCoverage, "no partial matrices to merge");
  std::vector<const PartialAdmittance*> ordered;
  for (const auto& p : parts) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->region < b->region; });

  const auto& first = *ordered.front();
  std::set<RegionId> regions;
  std::set<BranchId> covered;
  std::set<BusId> owned;
  StampTerms terms;
  for (const auto* p : ordered) {
    if (p->n != first.n || p->bus_ids != first.bus_ids) {
      throw Error(Errc::InvalidArgument, "partials disagree on the bus set");
    }
    if (!regions.insert(p->region).second) {
      throw Error(Errc::DuplicateCoverage, "region " + std::to_string(p->region) + " appears twice");
    }
    for (BranchId id : p->branch_ids) {
      if (!covered.insert(id).second) {
        throw Error(Errc::DuplicateCoverage, "branch " + std::to_string(id) + " stamped by more than one region");
      }
    }
    for (BusId id : p->owned_buses) {
      if (!owned.insert(id).second) {
        throw Error(Errc::DuplicateCoverage, "bus " + std::to_string(id) + " owned by more than one region");
      }
    }
    for (const auto& [key, values] : p->terms) {
      auto& dst = terms[key];
      dst.insert(dst.end(), values.begin(), values.end());
    }
  }
  if (covered != expected_branches) {
    throw Error(Errc::IncompleteCoverage, "stamped branches do not match the expected Closed set");
  }
  if (owned.size() != first.bus_ids.size()) {
    throw Error(Errc::IncompleteCoverage, "some buses are not owned by any region");
  }
  return finalize(first.n, first.bus_ids, terms);
}

void validate_fault(const GridCase& c, const FaultSpec& fault) {
  if (!c.has_bus(fault.faulted_bus)) {
    throw Error(Errc::InvalidArgument, "faulted bus " + std::to_string(fault.faulted_bus) + " does not exist");
  }
  if (fault.cleared_branch) {
    const Branch* br = c.find_branch(*fault.cleared_branch);
    if (br == nullptr) {
      throw Error(Errc::InvalidArgument, "cleared branch " + std::to_string(*fault.cleared_branch) + " does not exist");
    }
    if (!br->closed()) {
      throw Error(Errc::InvalidArgument, "cleared branch " + std::to_string(br->id) + " is already Open");
    }
  }
  if (!(fault.t_fault >= 0.0 && fault.t_fault < fault.t_clear)) {
    throw Error(Errc::InvalidArgument, "fault times need 0 <= t_fault < t_clear");
  }
}

FaultVariants fault_variants(const YMatrix& y, const GridCase& c, const FaultSpec& fault) {
  validate_fault(c, fault);
  FaultVariants v{y, y, y};
  const int f = static_cast<int>(c.bus_index(fault.faulted_bus));
  v.on.entries[{f, f}] += fault.y_fault;
  if (fault.cleared_branch) {
    GridCase cleared = c;
    cleared.find_branch(*fault.cleared_branch)->status = BranchStatus::Open;
    v.post = build_ybus(cleared);
  }
  return v;
}

}  // namespace gridedge
