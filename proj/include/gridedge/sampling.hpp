// SPDX-License-Identifier: Apache-2.0
//
// Forecast-error scenarios: Latin-hypercube draws of per-load multipliers
// reduced to a weighted representative set by seeded k-means.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridedge/grid.hpp"

namespace gridedge {

enum class ErrorDistribution { Gaussian, Uniform };

/// Relative error of one load. Gaussian(sigma) truncated at +/- truncation
/// sigmas, or Uniform(+/- half_width). Uniform with half_width 0 is the
/// zero-variance model.
struct ErrorModel {
  ErrorDistribution dist = ErrorDistribution::Gaussian;
  double param = 0.05;  // sigma or half width
  double truncation = 3.0;
};

struct ForecastSpec {
  std::vector<BusId> load_buses;  // ascending, one entry per dimension
  std::vector<ErrorModel> errors;

  static ForecastSpec uniform_for(std::vector<BusId> load_buses, ErrorModel model);
  void validate() const;
};

struct Scenario {
  int id = 0;
  std::uint64_t seed = 0;  // seed of the draw this scenario came from
  std::vector<double> multipliers;
};

struct ScenarioSet {
  std::vector<BusId> load_buses;
  std::vector<Scenario> representatives;
  std::vector<double> weights;
  std::size_t n_raw = 0;
};

inline constexpr double kMinMultiplier = 0.01;

/// Deterministic in `seed` (SplitMix64-seeded xoshiro256**).
std::vector<Scenario> draw_samples(const ForecastSpec& spec, std::size_t n_raw, std::uint64_t seed);

/// k-means with a seeded first centre then greedy farthest-point seeding,
/// at most 100 Lloyd iterations, ties to the lowest index. Each surviving
/// cluster contributes the sample nearest its centroid, weighted by
/// population / n_raw; empty clusters are dropped. The returned load_buses
/// is empty: samples do not carry bus ids, so callers fill it in.
ScenarioSet reduce_scenarios(std::span<const Scenario> samples, std::size_t k, std::uint64_t seed);

/// Scales every load by its multiplier (order = ascending load bus id) and
/// every generator's p_mech by new total load / old total load.
GridCase apply_scenario(const GridCase& grid_case, const Scenario& scenario);

/// Scenario over `loads` that multiplies each listed bus and leaves others at 1.
Scenario expand_scenario(const Scenario& partial, std::span<const BusId> partial_buses,
                         std::span<const BusId> all_load_buses);

/// Small seedable PRNG used by sampling and the link emulator.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t s_[4];
};

}  // namespace gridedge
