// SPDX-License-Identifier: Apache-2.0
#include "gridedge/node.hpp"

#include <ctime>
#include <filesystem>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace {

bool needs_quotes(std::string_view v) {
  return v.empty() || v.find_first_of(" \"=\t\n") != std::string_view::npos;
}

std::string quote(std::string_view v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c == '\n' ? ' ' : c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

EventLog::EventLog(const std::string& path, std::string node_id, Clock clock)
    : node_id_(std::move(node_id)), clock_(std::move(clock)) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  out_.open(path, std::ios::app);
  if (!out_) throw Error(Errc::Io, "cannot open log " + path);
}

void EventLog::write(std::string_view event, const Fields& fields) {
  std::lock_guard lock(mu_);
  if (!out_.is_open()) return;
  out_ << format_line(clock_(), node_id_, event, fields) << '\n';
  out_.flush();
}

std::string EventLog::format_time(std::chrono::system_clock::time_point t) {
  using namespace std::chrono;
  const auto us = duration_cast<microseconds>(t.time_since_epoch()).count();
  auto secs = static_cast<std::time_t>(us / 1000000);
  auto frac = us % 1000000;
  if (frac < 0) {
    frac += 1000000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[64];
  std::snprintf(out, sizeof out, "%s.%06lldZ", buf, static_cast<long long>(frac));
  return out;
}

std::string EventLog::format_line(std::chrono::system_clock::time_point t, std::string_view node_id,
                                  std::string_view event, const Fields& fields) {
  std::string line = format_time(t);
  line += ' ';
  line += node_id;
  line += ' ';
  line += event;
  for (const auto& [k, v] : fields) {
    line += ' ';
    line += k;
    line += '=';
    line += needs_quotes(v) ? quote(v) : v;
  }
  return line;
}

std::string LogRecord::field(std::string_view key, std::string fallback) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  return fallback;
}

LogRecord parse_log_line(std::string_view line) {
  auto bad = [&](const char* why) {
    return Error(Errc::InvalidArgument, std::string("log line: ") + why + ": " + std::string(line));
  };
  std::size_t at = 0;
  auto word = [&]() {
    while (at < line.size() && line[at] == ' ') ++at;
    const auto start = at;
    while (at < line.size() && line[at] != ' ') ++at;
    return line.substr(start, at - start);
  };
  LogRecord rec;
  const auto stamp = word();
  std::tm tm{};
  int micros = 0;
  if (stamp.size() != 27 || std::sscanf(std::string(stamp).c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%6dZ", &tm.tm_year,
                                        &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &micros) != 7) {
    throw bad("bad timestamp");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  rec.time = std::chrono::system_clock::time_point(std::chrono::seconds(timegm(&tm))) +
             std::chrono::microseconds(micros);
  rec.node_id = std::string(word());
  rec.event = std::string(word());
  if (rec.node_id.empty() || rec.event.empty()) throw bad("missing node or event");
  while (at < line.size()) {
    while (at < line.size() && line[at] == ' ') ++at;
    if (at >= line.size()) break;
    const auto eq = line.find('=', at);
    if (eq == std::string_view::npos) throw bad("field without '='");
    std::string key(line.substr(at, eq - at));
    at = eq + 1;
    std::string value;
    if (at < line.size() && line[at] == '"') {
      ++at;
      bool closed = false;
      while (at < line.size()) {
        const char c = line[at++];
        if (c == '\\' && at < line.size()) {
          value.push_back(line[at++]);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value.push_back(c);
        }
      }
      if (!closed) throw bad("unterminated quote");
    } else {
      const auto end = line.find(' ', at);
      value = std::string(line.substr(at, end == std::string_view::npos ? std::string_view::npos : end - at));
      at = end == std::string_view::npos ? line.size() : end;
    }
    rec.fields.emplace_back(std::move(key), std::move(value));
  }
  return rec;
}

}  // namespace gridedge
