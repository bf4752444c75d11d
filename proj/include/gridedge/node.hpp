// SPDX-License-Identifier: Apache-2.0
//
// The contract between a node state machine and the runtime that hosts it.
// Nodes are event driven and single threaded: every callback runs on the
// host's event loop. Heavy work goes through run_async, whose continuation
// comes back on the loop.
#pragma once

#include <chrono>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridedge/wire.hpp"

namespace gridedge {

using PeerId = int;
using TimerId = int;
using Fields = std::vector<std::pair<std::string, std::string>>;

class NodeHost {
 public:
  virtual ~NodeHost() = default;

  virtual const std::string& node_id() const = 0;
  /// Seconds on the host clock (wall or virtual).
  virtual double now() const = 0;
  /// Opens a stream to `address`; throws Io when nobody answers.
  virtual PeerId connect(const std::string& address) = 0;
  /// Queues a frame through the emulated link. Unknown or closed peers are
  /// ignored.
  virtual void send(PeerId peer, const wire::Envelope& envelope) = 0;
  virtual TimerId start_timer(double delay_s, std::function<void()> fn) = 0;
  virtual void cancel_timer(TimerId id) = 0;
  /// Runs `work` off the loop; the returned continuation runs on the loop.
  virtual void run_async(std::function<std::function<void()>()> work) = 0;
  /// Thread safe; callable from run_async work.
  virtual void log(std::string_view event, const Fields& fields = {}) = 0;
  /// Flushes queued frames and ends the host's run loop.
  virtual void stop(int exit_code = 0) = 0;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual void start(NodeHost& host) = 0;
  virtual void on_message(PeerId from, const wire::Envelope& envelope) = 0;
  virtual void on_disconnect(PeerId /*peer*/) {}
};

/// `<ISO-8601 UTC, microseconds> <node_id> <event> k=v ...`, one line per
/// event. Values containing spaces or quotes are double quoted.
class EventLog {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  /// Empty path: discard.
  EventLog(const std::string& path, std::string node_id, Clock clock);

  void write(std::string_view event, const Fields& fields);
  const std::string& node_id() const { return node_id_; }

  static std::string format_time(std::chrono::system_clock::time_point t);
  static std::string format_line(std::chrono::system_clock::time_point t, std::string_view node_id,
                                 std::string_view event, const Fields& fields);

 private:
  std::string node_id_;
  Clock clock_;
  std::mutex mu_;
  std::ofstream out_;
};

struct LogRecord {
  std::chrono::system_clock::time_point time;
  std::string node_id;
  std::string event;
  Fields fields;

  std::string field(std::string_view key, std::string fallback = "") const;
};

/// Inverse of EventLog::format_line; throws InvalidArgument on bad lines.
LogRecord parse_log_line(std::string_view line);

}  // namespace gridedge
