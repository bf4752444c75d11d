// SPDX-License-Identifier: Apache-2.0
//
// Link impairment model calibrated to measured 5G SA figures: a one-way
// base delay, additive jitter, per-direction serialization at a fixed rate
// and optional loss. Times are seconds on whatever clock the caller uses.
#pragma once

#include <cstdint>
#include <mutex>

#include "gridedge/config.hpp"
#include "gridedge/sampling.hpp"

namespace gridedge {

struct LinkProfile {
  double delay_min_ms = 7.5;   // one-way, half of the 15..37 ms round trip
  double delay_max_ms = 18.5;
  double jitter_mean_ms = 5.0;  // exponential, truncated at the cap
  double jitter_cap_ms = 18.31;
  double bw_up_bps = 52.43e6;
  double bw_down_bps = 306.01e6;
  double loss = 0.0;
  std::uint64_t seed = 1;

  static LinkProfile default_5g_sa() { return {}; }
  /// No delay, no jitter, unlimited bandwidth.
  static LinkProfile zero_impairment();
  /// Reads link.* keys over the 5G SA defaults. Bandwidths are in Mbps.
  static LinkProfile from_config(const Config& cfg);
  void validate() const;
  bool operator==(const LinkProfile&) const = default;
};

enum class Direction { Up, Down };

struct Delivery {
  bool dropped = false;
  double time = 0.0;           // when the frame is handed to the receiver
  double start = 0.0;          // when serialization began
  double serialization = 0.0;  // 8 len / bw
  double delay = 0.0;          // base one-way delay, before jitter
  double jitter = 0.0;
};

/// One link, two independent directions, each a single FIFO queue. The
/// draws for a direction depend only on the seed and that direction's
/// submission sequence. Thread safe.
class LinkScheduler {
 public:
  explicit LinkScheduler(LinkProfile profile);

  Delivery schedule(std::size_t frame_len, Direction direction, double now);
  const LinkProfile& profile() const { return profile_; }

 private:
  struct Lane {
    explicit Lane(std::uint64_t seed) : rng(seed) {}
    Xoshiro256 rng;
    double busy_until = 0.0;
    double last_delivery = 0.0;
  };

  LinkProfile profile_;
  std::mutex mu_;
  Lane up_, down_;
};

}  // namespace gridedge
