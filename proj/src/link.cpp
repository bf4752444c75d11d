// SPDX-License-Identifier: Apache-2.0
#include "gridedge/link.hpp"

#include <cmath>
#include <limits>

#include "gridedge/error.hpp"

namespace gridedge {

LinkProfile LinkProfile::zero_impairment() {
  LinkProfile p;
  p.delay_min_ms = p.delay_max_ms = 0.0;
  p.jitter_mean_ms = p.jitter_cap_ms = 0.0;
  p.bw_up_bps = p.bw_down_bps = std::numeric_limits<double>::infinity();
  return p;
}

LinkProfile LinkProfile::from_config(const Config& cfg) {
  LinkProfile p;
  p.delay_min_ms = cfg.get_double("link.delay_min_ms", p.delay_min_ms);
  p.delay_max_ms = cfg.get_double("link.delay_max_ms", p.delay_max_ms);
  p.jitter_mean_ms = cfg.get_double("link.jitter_mean_ms", p.jitter_mean_ms);
  p.jitter_cap_ms = cfg.get_double("link.jitter_cap_ms", p.jitter_cap_ms);
  p.bw_up_bps = cfg.get_double("link.bw_up_mbps", p.bw_up_bps / 1e6) * 1e6;
  p.bw_down_bps = cfg.get_double("link.bw_down_mbps", p.bw_down_bps / 1e6) * 1e6;
  p.loss = cfg.get_double("link.loss", p.loss);
  p.seed = cfg.get_uint("link.seed", p.seed);
  p.validate();
  return p;
}

void LinkProfile::validate() const {
  if (!(delay_min_ms >= 0.0) || !(delay_max_ms >= delay_min_ms)) {
    throw Error(Errc::InvalidArgument, "link delays need 0 <= delay_min_ms <= delay_max_ms");
  }
  if (!(jitter_mean_ms >= 0.0) || !(jitter_cap_ms >= 0.0)) {
    throw Error(Errc::InvalidArgument, "link jitter must be nonnegative");
  }
  if (!(bw_up_bps > 0.0) || !(bw_down_bps > 0.0)) throw Error(Errc::InvalidArgument, "link bandwidths must be positive");
  if (!(loss >= 0.0 && loss < 1.0)) throw Error(Errc::InvalidArgument, "link loss must lie in [0, 1)");
}

LinkScheduler::LinkScheduler(LinkProfile profile)
    : profile_(profile), up_(profile.seed * 2 + 0), down_(profile.seed * 2 + 1) {
  profile_.validate();
}

Delivery LinkScheduler::schedule(std::size_t frame_len, Direction direction, double now) {
  if (frame_len == 0) throw Error(Errc::InvalidArgument, "frame_len must be positive");
  std::lock_guard lock(mu_);
  Lane& lane = direction == Direction::Up ? up_ : down_;
  const double bw = direction == Direction::Up ? profile_.bw_up_bps : profile_.bw_down_bps;

  // Fixed draw order per frame: loss, delay, jitter.
  const double u_loss = lane.rng.uniform();
  const double u_delay = lane.rng.uniform();
  const double u_jitter = lane.rng.uniform();

  Delivery d;
  if (u_loss < profile_.loss) {
    d.dropped = true;
    return d;
  }
  d.start = std::max(now, lane.busy_until);
  d.serialization = 8.0 * static_cast<double>(frame_len) / bw;
  lane.busy_until = d.start + d.serialization;
  d.delay = (profile_.delay_min_ms + (profile_.delay_max_ms - profile_.delay_min_ms) * u_delay) / 1e3;
  if (profile_.jitter_mean_ms > 0.0 && profile_.jitter_cap_ms > 0.0) {
    // Inverse CDF of the exponential conditioned on [0, cap].
    const double mass = -std::expm1(-profile_.jitter_cap_ms / profile_.jitter_mean_ms);
    d.jitter = std::min(-profile_.jitter_mean_ms * std::log1p(-u_jitter * mass), profile_.jitter_cap_ms) / 1e3;
  }
  // TCP keeps order, so a short jitter draw cannot overtake the previous frame.
  d.time = std::max(lane.busy_until + d.delay + d.jitter, lane.last_delivery);
  lane.last_delivery = d.time;
  return d;
}

}  // namespace gridedge
