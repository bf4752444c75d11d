// SPDX-License-Identifier: Apache-2.0
//
// Sparse complex admittance matrix (Y-bus) assembly, per-region partial
// matrices and their merge, and the pre/on/post fault variants.
//
// Every entry is the exactly rounded sum of the stamps that touch it (see
// exact_sum). Partials keep their individual stamps, so merging any
// partition of the branches reproduces build_ybus bit for bit.
#pragma once

#include <complex>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridedge/grid.hpp"

namespace gridedge {

using Complex = std::complex<double>;
/// (row, col) as 0-based positions in ascending bus-id order.
using EntryKey = std::pair<int, int>;
using StampTerms = std::map<EntryKey, std::vector<Complex>>;

/// Correctly rounded sum of `values`; the result does not depend on order.
/// Zero results are returned as +0.0.
double exact_sum(std::span<const double> values);
Complex exact_sum(std::span<const Complex> values);

struct YMatrix {
  std::size_t n = 0;
  std::vector<BusId> bus_ids;
  std::map<EntryKey, Complex> entries;

  /// Zero when the entry is structurally absent.
  Complex at(std::size_t row, std::size_t col) const;
  Eigen::MatrixXcd dense() const;
};

/// Same shape, same sparsity pattern and bitwise-identical values.
bool bitwise_equal(const YMatrix& a, const YMatrix& b);

struct BranchStamp {
  Complex ff, ft, tf, tt;
};

/// y = 1/(r + jx); ff = y/tap^2 + j b/2, tt = y + j b/2, ft = tf = -y/tap.
BranchStamp branch_stamp(const Branch& branch);

YMatrix build_ybus(const GridCase& grid_case);

struct PartialAdmittance {
  RegionId region = 0;
  std::size_t n = 0;
  std::vector<BusId> bus_ids;
  std::set<BranchId> branch_ids;  // stamped (Closed) branches
  std::set<BusId> owned_buses;    // buses whose shunts belong to this region
  StampTerms terms;

  /// The region's contribution summed entrywise.
  YMatrix summed() const;
};

PartialAdmittance build_partial(const GridCase& grid_case, RegionId region, const Partition& partition);

/// Throws DuplicateCoverage when two parts stamp the same branch or own the
/// same bus, IncompleteCoverage when the stamped branches differ from
/// `expected_branches` or some bus is unowned.
YMatrix merge_partials(std::span<const PartialAdmittance> parts, const std::set<BranchId>& expected_branches);

inline constexpr Complex kDefaultFaultAdmittance{0.0, -1e6};

struct FaultSpec {
  BusId faulted_bus = 0;
  std::optional<BranchId> cleared_branch;
  double t_fault = 0.0;
  double t_clear = 0.0;
  Complex y_fault = kDefaultFaultAdmittance;
};

void validate_fault(const GridCase& grid_case, const FaultSpec& fault);

struct FaultVariants {
  YMatrix pre, on, post;
};

FaultVariants fault_variants(const YMatrix& y, const GridCase& grid_case, const FaultSpec& fault);

}  // namespace gridedge
