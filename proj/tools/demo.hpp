// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "gridedge/config.hpp"

namespace gridedge::cli {

enum class DemoKind { Topology, Dsa };

/// Runs a whole demo: cloud, one edge per region, demo.ues UEs and a run
/// controller, as child processes of `self_exe` (or in one process on a
/// virtual clock), then checks the result against an in-process oracle and
/// writes the report. Returns the CLI exit code.
int run_demo(DemoKind kind, Config cfg, const std::string& self_exe);

/// Built-in overrides that turn the base defaults into each demo's run.
Config demo_defaults(DemoKind kind);

}  // namespace gridedge::cli
