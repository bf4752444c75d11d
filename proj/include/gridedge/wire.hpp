// SPDX-License-Identifier: Apache-2.0
//
// Frame codec for the node links.
//
//   "GM" | version | msg_type | run_id[16] | payload_len (u32 BE) | payload | crc32(payload) (u32 BE)
//
// The payload is canonical JSON (see messages.hpp). Decoding is total: any
// input yields an Envelope or a classified gridedge::Error.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace gridedge::wire {

inline constexpr std::uint8_t kMagic0 = 0x47;  // 'G'
inline constexpr std::uint8_t kMagic1 = 0x4D;  // 'M'
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::size_t kTrailerSize = 4;
inline constexpr std::size_t kMaxPayload = 16u << 20;

enum class MsgType : std::uint8_t {
  Hello = 0x01,
  TopologyReport = 0x02,
  ForecastReport = 0x03,
  Ack = 0x04,
  PartialReady = 0x05,
  ScenarioReady = 0x06,
  RunResult = 0x07,
  ErrorMsg = 0x08,
  RunOpen = 0x09,
  RunClose = 0x0A,
};

std::string_view to_string(MsgType type);
bool is_known(std::uint8_t raw);

/// Run ids travel as 16 raw bytes; textual ids are ASCII, zero padded.
using RunId = std::array<std::uint8_t, 16>;
RunId make_run_id(std::string_view text);
std::string run_id_text(const RunId& id);

struct Envelope {
  std::uint8_t version = kVersion;
  MsgType type = MsgType::Ack;
  RunId run_id{};
  std::string payload;

  bool operator==(const Envelope&) const = default;
};

std::uint32_t crc32(std::string_view bytes);

/// Throws PayloadTooLarge past kMaxPayload and Version for a foreign version.
std::string encode(const Envelope& envelope);

/// Exactly one frame. Errors, checked in this order: Framing (bad magic, or
/// bytes after the frame), Version, UnknownType, PayloadTooLarge,
/// Incomplete (truncated), Corruption (crc mismatch).
Envelope decode(std::string_view bytes);

/// Size of the frame at the head of `bytes`, or nullopt while the header or
/// body is still arriving. Validates the header fields it has seen.
std::optional<std::size_t> frame_size(std::string_view bytes);

/// Reassembles frames from arbitrary read boundaries on one stream.
class FrameBuffer {
 public:
  void append(std::string_view bytes) { buffer_.append(bytes); }
  /// Next complete frame, or nullopt if more bytes are needed. A framing or
  /// corruption error leaves the stream unusable.
  std::optional<Envelope> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

}  // namespace gridedge::wire
