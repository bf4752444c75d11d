// SPDX-License-Identifier: Apache-2.0
#include "gridedge/error.hpp"

namespace gridedge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "invalid_argument";
    case Errc::InvalidCase: return "invalid_case";
    case Errc::DegenerateBranch: return "degenerate_branch";
    case Errc::UnknownRegion: return "unknown_region";
    case Errc::DuplicateCoverage: return "duplicate_coverage";
    case Errc::IncompleteCoverage: return "incomplete_coverage";
    case Errc::Divergence: return "divergence";
    case Errc::Singular: return "singular";
    case Errc::NumericBlowup: return "numeric_blowup";
    case Errc::Framing: return "framing";
    case Errc::Corruption: return "corruption";
    case Errc::Incomplete: return "incomplete";
    case Errc::Version: return "version";
    case Errc::UnknownType: return "unknown_type";
    case Errc::PayloadTooLarge: return "payload_too_large";
    case Errc::BadPayload: return "bad_payload";
    case Errc::InvalidKey: return "invalid_key";
    case Errc::AlreadyExists: return "already_exists";
    case Errc::NotFound: return "not_found";
    case Errc::Io: return "io";
    case Errc::Timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace gridedge
