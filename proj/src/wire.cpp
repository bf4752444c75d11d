// SPDX-License-Identifier: Apache-2.0
#include "gridedge/wire.hpp"

#include <zlib.h>

#include "gridedge/error.hpp"

namespace gridedge::wire {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(in[at + i]);
  return v;
}

std::uint8_t byte_at(std::string_view in, std::size_t at) { return static_cast<std::uint8_t>(in[at]); }

}  // namespace

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::Hello: return "Hello";
    case MsgType::TopologyReport: return "TopologyReport";
    case MsgType::ForecastReport: return "ForecastReport";
    case MsgType::Ack: return "Ack";
    case MsgType::PartialReady: return "PartialReady";
    case MsgType::ScenarioReady: return "ScenarioReady";
    case MsgType::RunResult: return "RunResult";
    case MsgType::ErrorMsg: return "ErrorMsg";
    case MsgType::RunOpen: return "RunOpen";
    case MsgType::RunClose: return "RunClose";
  }
  return "Unknown";
}

bool is_known(std::uint8_t raw) { return raw >= 0x01 && raw <= 0x0A; }

RunId make_run_id(std::string_view text) {
  if (text.empty() || text.size() > 16) throw Error(Errc::InvalidArgument, "run id must be 1..16 characters");
  RunId id{};
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-' || c == '_';
    if (!ok) throw Error(Errc::InvalidArgument, "run id may only use [A-Za-z0-9_-]: " + std::string(text));
    id[i] = c;
  }
  return id;
}

std::string run_id_text(const RunId& id) {
  std::string out;
  for (auto c : id) {
    if (c == 0) break;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay portable.
  std::size_t at = 0;
  while (at < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - at, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + at), static_cast<uInt>(chunk));
    at += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string encode(const Envelope& env) {
  if (env.version != kVersion) throw Error(Errc::Version, "cannot encode version " + std::to_string(env.version));
  if (env.payload.size() > kMaxPayload) {
    throw Error(Errc::PayloadTooLarge, "payload of " + std::to_string(env.payload.size()) + " bytes exceeds 16 MiB");
  }
  std::string out;
  out.reserve(kHeaderSize + env.payload.size() + kTrailerSize);
  out.push_back(static_cast<char>(kMagic0));
  out.push_back(static_cast<char>(kMagic1));
  out.push_back(static_cast<char>(env.version));
  out.push_back(static_cast<char>(env.type));
  out.append(reinterpret_cast<const char*>(env.run_id.data()), env.run_id.size());
  put_u32(out, static_cast<std::uint32_t>(env.payload.size()));
  out += env.payload;
  put_u32(out, crc32(env.payload));
  return out;
}

std::optional<std::size_t> frame_size(std::string_view in) {
  if (in.size() >= 1 && byte_at(in, 0) != kMagic0) throw Error(Errc::Framing, "bad magic");
  if (in.size() >= 2 && byte_at(in, 1) != kMagic1) throw Error(Errc::Framing, "bad magic");
  if (in.size() >= 3 && byte_at(in, 2) != kVersion) {
    throw Error(Errc::Version, "unsupported version " + std::to_string(byte_at(in, 2)));
  }
  if (in.size() >= 4 && !is_known(byte_at(in, 3))) {
    throw Error(Errc::UnknownType, "unknown msg_type " + std::to_string(byte_at(in, 3)));
  }
  if (in.size() < kHeaderSize) return std::nullopt;
  const std::uint32_t len = get_u32(in, 20);
  if (len > kMaxPayload) throw Error(Errc::PayloadTooLarge, "declared payload of " + std::to_string(len) + " bytes");
  const std::size_t total = kHeaderSize + len + kTrailerSize;
  if (in.size() < total) return std::nullopt;
  return total;
}

Envelope decode(std::string_view in) {
  const auto size = frame_size(in);
  if (!size) throw Error(Errc::Incomplete, "truncated frame (" + std::to_string(in.size()) + " bytes)");
  if (in.size() != *size) {
    throw Error(Errc::Framing, std::to_string(in.size() - *size) + " trailing bytes after frame");
  }
  Envelope env;
  env.version = byte_at(in, 2);
  env.type = static_cast<MsgType>(byte_at(in, 3));
  for (std::size_t i = 0; i < 16; ++i) env.run_id[i] = byte_at(in, 4 + i);
  env.payload.assign(in.substr(kHeaderSize, *size - kHeaderSize - kTrailerSize));
  const std::uint32_t crc = get_u32(in, *size - kTrailerSize);
  if (crc != crc32(env.payload)) throw Error(Errc::Corruption, "crc mismatch");
  return env;
}

std::optional<Envelope> FrameBuffer::next() {
  const auto size = frame_size(buffer_);
  if (!size) return std::nullopt;
  auto env = decode(std::string_view(buffer_).substr(0, *size));
  buffer_.erase(0, *size);
  return env;
}

}  // namespace gridedge::wire
