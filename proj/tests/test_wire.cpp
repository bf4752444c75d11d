// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gridedge/messages.hpp"
#include "gridedge/wire.hpp"
#include "test_support.hpp"

using namespace gridedge;
using namespace gridedge::wire;

namespace {

// Frames assembled by hand from the layout (magic, version, type, run id,
// BE length, payload, BE crc32 via Python's zlib) and frozen here.
constexpr const char* kAckEmptyHex = "474d010400000000000000000000000000000000000000027b7da3a6bf43";
constexpr const char* kHelloEdgeHex =
    "474d010172756e2d3700000000000000000000000000002d7b226e6f64655f6964223a22656467652d32222c22726567696f6e"
    "223a322c22726f6c65223a2265646765227dadd40b86";
constexpr const char* kTopologyHex =
    "474d010272756e2d3700000000000000000000000000005e7b226272616e63686573223a5b7b226964223a342c2273746174"
    "7573223a224f70656e227d5d2c226c6f616473223a5b7b22627573223a352c22705f6c6f6164223a312e32352c22715f6c6f"
    "6164223a302e357d5d2c22736571223a337dd8a294c5";

std::string unhex(std::string_view hex) {
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

Envelope random_envelope(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(0, 255), type(1, 10), len(0, 300);
  Envelope e;
  e.type = static_cast<MsgType>(type(rng));
  for (auto& b : e.run_id) b = static_cast<std::uint8_t>(byte(rng));
  e.payload.resize(static_cast<std::size_t>(len(rng)));
  for (auto& c : e.payload) c = static_cast<char>(byte(rng));
  return e;
}

}  // namespace

TEST_CASE("crc32 check value") {
  CHECK(crc32("123456789") == 0xCBF43926u);
  CHECK(crc32("{}") == 0xA3A6BF43u);
  CHECK(crc32("") == 0u);
}

TEST_CASE("golden frames") {
  const auto ack = unhex(kAckEmptyHex);
  CHECK(read_file(testing::fixture("wire/ack_empty.bin")) == ack);
  CHECK(encode(msg::envelope(msg::Ack{})) == ack);
  const auto env = decode(ack);
  CHECK(env.type == MsgType::Ack);
  CHECK(env.run_id == RunId{});
  CHECK(env.payload == "{}");
  CHECK(!msg::payload_as<msg::Ack>(env).of.has_value());

  const auto hello = unhex(kHelloEdgeHex);
  CHECK(read_file(testing::fixture("wire/hello_edge.bin")) == hello);
  CHECK(encode(msg::envelope(msg::Hello{"edge-2", msg::Role::Edge, 2}, make_run_id("run-7"))) == hello);

  const auto topo = unhex(kTopologyHex);
  CHECK(read_file(testing::fixture("wire/topology_report.bin")) == topo);
  msg::TopologyReport report;
  report.seq = 3;
  report.branches = {{4, BranchStatus::Open}};
  report.loads = {{5, 1.25, 0.5}};
  CHECK(encode(msg::envelope(report, make_run_id("run-7"))) == topo);
  const auto back = msg::payload_as<msg::TopologyReport>(decode(topo));
  CHECK(back.branches == report.branches);
  CHECK(back.loads == report.loads);
  CHECK(run_id_text(decode(topo).run_id) == "run-7");
}

TEST_CASE("decode errors are classified") {
  const auto ack = unhex(kAckEmptyHex);

  auto flipped = ack;
  flipped.back() = static_cast<char>(flipped.back() ^ 0x01);
  CHECK(code_of([&] { decode(flipped); }) == Errc::Corruption);

  auto payload_hit = ack;
  payload_hit[24] = '[';
  CHECK(code_of([&] { decode(payload_hit); }) == Errc::Corruption);

  auto magic = ack;
  magic[0] = 'X';
  CHECK(code_of([&] { decode(magic); }) == Errc::Framing);

  auto version = ack;
  version[2] = 0x02;
  CHECK(code_of([&] { decode(version); }) == Errc::Version);

  auto type = ack;
  type[3] = 0x0B;
  CHECK(code_of([&] { decode(type); }) == Errc::UnknownType);
  type[3] = 0x00;
  CHECK(code_of([&] { decode(type); }) == Errc::UnknownType);

  auto huge = ack;
  huge[20] = 0x01;
  huge[21] = 0x00;
  huge[22] = 0x00;
  huge[23] = 0x01;
  CHECK(code_of([&] { decode(huge); }) == Errc::PayloadTooLarge);

  for (std::size_t cut = 0; cut < ack.size(); ++cut) {
    CHECK(code_of([&] { decode(std::string_view(ack).substr(0, cut)); }) == Errc::Incomplete);
  }
  CHECK(code_of([&] { decode(ack + "x"); }) == Errc::Framing);
}

TEST_CASE("payload limit") {
  Envelope e;
  e.payload.assign(kMaxPayload, 'a');
  CHECK(decode(encode(e)).payload.size() == kMaxPayload);
  e.payload.push_back('a');
  CHECK(code_of([&] { encode(e); }) == Errc::PayloadTooLarge);
}

TEST_CASE("round trip over random envelopes") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto e = random_envelope(rng);
    const auto bytes = encode(e);
    const auto back = decode(bytes);
    REQUIRE(back == e);
    REQUIRE(encode(back) == bytes);
  }
}

TEST_CASE("decoder is total on random bytes") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> len(0, 64 * 1024);
  int valid = 0, classified = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string bytes(i % 10 == 0 ? len(rng) : len(rng) % 64, '\0');
    for (auto& c : bytes) c = static_cast<char>(byte(rng));
    // Give a share of inputs a plausible header so deeper checks run.
    if (i % 3 == 0 && bytes.size() >= 4) {
      bytes[0] = 'G';
      bytes[1] = 'M';
      bytes[2] = 1;
      bytes[3] = static_cast<char>(1 + i % 10);
    }
    try {
      decode(bytes);
      ++valid;
    } catch (const Error&) {
      ++classified;
    }
  }
  CHECK(valid + classified == 10000);

  for (int i = 0; i < 1000; ++i) {
    auto bytes = encode(random_envelope(rng));
    // The type byte and run id are not covered by the crc; hit anything else.
    std::size_t at = std::uniform_int_distribution<std::size_t>(0, bytes.size() - 18)(rng);
    if (at >= 3) at += 17;
    bytes[at] = static_cast<char>(bytes[at] ^ static_cast<char>(1 + byte(rng) % 255));
    try {
      decode(bytes);
      FAIL("a single flipped byte must not decode");
    } catch (const Error& e) {
      CHECK(e.code() != Errc::Io);
    }
  }
}

TEST_CASE("stream reassembly at every split point") {
  std::mt19937_64 rng(3);
  std::string stream;
  std::vector<Envelope> sent;
  for (int i = 0; i < 3; ++i) {
    sent.push_back(random_envelope(rng));
    stream += encode(sent.back());
  }
  for (std::size_t split = 0; split <= stream.size(); ++split) {
    FrameBuffer buf;
    std::vector<Envelope> got;
    buf.append(std::string_view(stream).substr(0, split));
    while (auto e = buf.next()) got.push_back(*e);
    buf.append(std::string_view(stream).substr(split));
    while (auto e = buf.next()) got.push_back(*e);
    REQUIRE(got == sent);
    REQUIRE(buf.buffered() == 0);
  }

  FrameBuffer byte_by_byte;
  std::vector<Envelope> got;
  for (char c : stream) {
    byte_by_byte.append(std::string_view(&c, 1));
    while (auto e = byte_by_byte.next()) got.push_back(*e);
  }
  CHECK(got == sent);

  FrameBuffer bad;
  bad.append("GX");
  CHECK(code_of([&] { bad.next(); }) == Errc::Framing);
}

TEST_CASE("message payloads round trip") {
  msg::RunManifest m;
  m.run_id = "dsa-1";
  m.expected_regions = {1, 2, 3};
  m.fault.faulted_bus = 7;
  m.fault.cleared_branch = 4;
  m.fault.t_fault = 0.1;
  m.fault.t_clear = 0.185;
  m.mode = msg::RunMode::Dsa;
  m.dsa.error = {ErrorDistribution::Uniform, 0.1, 3.0};
  const auto env = msg::envelope(msg::RunOpen{m}, make_run_id(m.run_id));
  const auto back = msg::payload_as<msg::RunOpen>(decode(encode(env))).manifest;
  CHECK(msg::canonical(msg::json(back)) == msg::canonical(msg::json(m)));
  CHECK(back.fault.cleared_branch == 4);
  CHECK(back.sim.omega_s == m.sim.omega_s);

  CHECK(code_of([&] { msg::payload_as<msg::Hello>(env); }) == Errc::BadPayload);
  Envelope junk;
  junk.type = MsgType::Hello;
  junk.payload = "{\"node_id\":";
  CHECK(code_of([&] { msg::payload_as<msg::Hello>(junk); }) == Errc::BadPayload);
  junk.payload = "{\"role\":\"edge\"}";
  CHECK(code_of([&] { msg::payload_as<msg::Hello>(junk); }) == Errc::BadPayload);
}

TEST_CASE("partial artifact preserves every bit") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = testing::random_case(rng, 12, 3);
    const auto p = Partition::from_case(c);
    for (RegionId r : p.regions) {
      msg::PartialArtifact a;
      a.partial = build_partial(c, r, p);
      a.loads = {{1, 0.1 + 0.2, -0.0}};
      const auto back = msg::decode_partial(msg::encode_partial(a));
      REQUIRE(bitwise_equal(back.partial.summed(), a.partial.summed()));
      REQUIRE(back.partial.branch_ids == a.partial.branch_ids);
      REQUIRE(back.partial.owned_buses == a.partial.owned_buses);
      REQUIRE(back.loads[0].p_load == 0.1 + 0.2);
      REQUIRE(std::signbit(back.loads[0].q_load));
    }
  }
}
