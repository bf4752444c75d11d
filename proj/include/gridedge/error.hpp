// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridedge {

enum class Errc {
  InvalidArgument,
  InvalidCase,
  DegenerateBranch,
  UnknownRegion,
  DuplicateCoverage,
  IncompleteCoverage,
  Divergence,
  Singular,
  NumericBlowup,
  // wire
  Framing,
  Corruption,
  Incomplete,
  Version,
  UnknownType,
  PayloadTooLarge,
  BadPayload,
  // store
  InvalidKey,
  AlreadyExists,
  NotFound,
  // runtime
  Io,
  Timeout,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gridedge
