// SPDX-License-Identifier: Apache-2.0
#include "gridedge/config.hpp"

#include <fstream>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = origin + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw Error(Errc::InvalidArgument, where + ": expected `section.key = value`");
    const auto key = std::string(text::trim(body.substr(0, eq)));
    const auto value = std::string(text::trim(body.substr(eq + 1)));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      throw Error(Errc::InvalidArgument, where + ": key must look like section.key, got `" + key + "`");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse(s.str(), path);
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> Config::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return text::parse_double(*v);
  } catch (const Error&) {
    throw Error(Errc::InvalidArgument, key + ": expected a number, got `" + *v + "`");
  }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return text::parse_int(*v);
  } catch (const Error&) {
    throw Error(Errc::InvalidArgument, key + ": expected an integer, got `" + *v + "`");
  }
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw Error(Errc::InvalidArgument, key + ": must not be negative");
  return static_cast<std::uint64_t>(v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error(Errc::InvalidArgument, key + ": expected true or false, got `" + *v + "`");
}

}  // namespace gridedge
