// SPDX-License-Identifier: Apache-2.0
//
// Every configuration key the command line understands, and the layering
// rule: built-in default < config file < profile file < command-line flag.
#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "gridedge/config.hpp"
#include "gridedge/messages.hpp"

namespace gridedge {

struct KeySpec {
  std::string_view key;
  std::string_view fallback;  // "" means unset
  std::string_view flag;      // CLI flag that overrides it, if any
  std::string_view help;
};

std::span<const KeySpec> known_keys();

/// Layers defaults, `preset` (a command's own defaults), `config_path`, the
/// profile named by link.profile (after flags are applied) and `flags`.
/// Unknown keys are rejected.
Config resolve_config(const std::optional<std::string>& config_path, const Config& flags,
                      const Config& preset = {});

/// Reads run.* keys. The run id comes from run.id.
msg::RunManifest manifest_from_config(const Config& cfg);

/// "1,2,3" -> {1,2,3}
std::set<RegionId> parse_region_list(std::string_view text);

}  // namespace gridedge
