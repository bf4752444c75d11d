// SPDX-License-Identifier: Apache-2.0
//
// Two hosts for the node state machines: LiveHost runs one node per process
// over TCP with the link emulator delaying every outgoing frame; and
// VirtualNetwork runs many nodes in one process on a simulated clock.
#pragma once

#include <chrono>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "gridedge/link.hpp"
#include "gridedge/node.hpp"

namespace gridedge {

struct HostOptions {
  std::string node_id;
  LinkProfile link = LinkProfile::default_5g_sa();
  std::string log_path;  // empty: no log file
  unsigned workers = 2;
  double connect_timeout_s = 10.0;  // connect() retries until this elapses
  double flush_timeout_s = 10.0;    // stop() waits this long for queued frames
};

/// "host:port" -> (host, port). An empty host means all interfaces.
std::pair<std::string, int> split_address(const std::string& address);

class LiveHost : public NodeHost {
 public:
  explicit LiveHost(HostOptions options);
  ~LiveHost() override;

  /// Binds `address` (port 0 picks a free one) and returns the bound port.
  int listen(const std::string& address);
  /// Starts the node and runs the loop until stop(); returns the exit code.
  int run(Node& node);

  const std::string& node_id() const override;
  double now() const override;
  PeerId connect(const std::string& address) override;
  void send(PeerId peer, const wire::Envelope& envelope) override;
  TimerId start_timer(double delay_s, std::function<void()> fn) override;
  void cancel_timer(TimerId id) override;
  void run_async(std::function<std::function<void()>()> work) override;
  void log(std::string_view event, const Fields& fields = {}) override;
  void stop(int exit_code = 0) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deterministic discrete-event network. Every frame is really encoded and
/// decoded; delivery times come from one LinkScheduler per connection, the
/// dialing side sending Up. run_async work runs inline and its continuation
/// is queued at the same virtual time.
class VirtualNetwork {
 public:
  /// Logs go to `<log_dir>/<node_id>.log` stamped `epoch + virtual time`.
  VirtualNetwork(LinkProfile link, std::string log_dir = "",
                 std::chrono::system_clock::time_point epoch = std::chrono::system_clock::time_point{});
  ~VirtualNetwork();

  /// The node starts at the current virtual time once run() reaches it.
  void add(const std::string& node_id, Node& node, const std::string& listen_address = "");
  /// Processes events until none are left or the clock would pass `until`.
  void run(double until = std::numeric_limits<double>::infinity());

  double now() const;
  /// Exit code passed to stop(), or nullopt while the node is running.
  std::optional<int> exit_code(const std::string& node_id) const;
  std::uint64_t frames_delivered() const;
  std::uint64_t frames_dropped() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gridedge
