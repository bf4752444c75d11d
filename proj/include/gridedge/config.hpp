// SPDX-License-Identifier: Apache-2.0
//
// Flat `section.key = value` configuration. Later layers win, so callers
// load defaults, then the file, then CLI flags.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace gridedge {

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  /// Copies every key of `other` over this one.
  void merge(const Config& other);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace gridedge
