// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "gridedge/error.hpp"
#include "gridedge/link.hpp"
#include "gridedge/settings.hpp"
#include "test_support.hpp"

using namespace gridedge;
using testing::TempDir;

namespace {

std::string write(const std::filesystem::path& p, const std::string& body) {
  std::ofstream(p) << body;
  return p.string();
}

}  // namespace

TEST_CASE("every key resolves flag over file over default") {
  TempDir dir;
  for (const auto& k : known_keys()) {
    const std::string key(k.key);
    if (key == "link.profile") continue;  // names a file; covered below
    CAPTURE(key);

    const auto defaults = resolve_config(std::nullopt, {});
    if (k.fallback.empty()) {
      CHECK_FALSE(defaults.has(key));
    } else {
      CHECK(defaults.find(key) == std::string(k.fallback));
    }

    const auto file = write(dir.path / "f.conf", key + " = from-file\n");
    CHECK(resolve_config(file, {}).find(key) == "from-file");

    Config flags;
    flags.set(key, "from-flag");
    CHECK(resolve_config(file, flags).find(key) == "from-flag");
    CHECK(resolve_config(std::nullopt, flags).find(key) == "from-flag");
  }
}

TEST_CASE("link profile sits between the file and the flags") {
  TempDir dir;
  const auto profile = write(dir.path / "p.conf", "link.loss = 0.2\nlink.seed = 9\n");
  const auto file = write(dir.path / "f.conf", "link.profile = " + profile + "\nlink.loss = 0.1\nlink.bw_up_mbps = 10\n");

  const auto a = resolve_config(file, {});
  CHECK(a.find("link.loss") == "0.2");
  CHECK(a.find("link.seed") == "9");
  CHECK(a.find("link.bw_up_mbps") == "10");

  Config flags;
  flags.set("link.loss", "0.3");
  CHECK(resolve_config(file, flags).find("link.loss") == "0.3");

  // --profile beats the file's link.profile
  const auto other = write(dir.path / "q.conf", "link.loss = 0.4\n");
  Config by_flag;
  by_flag.set("link.profile", other);
  const auto b = resolve_config(file, by_flag);
  CHECK(b.find("link.loss") == "0.4");
  CHECK(b.find("link.seed") == "1");
}

TEST_CASE("shipped profiles load") {
  for (const char* name : {"5g-sa.conf", "zero.conf", "lossy.conf"}) {
    CAPTURE(name);
    Config flags;
    flags.set("link.profile", std::string(GRIDEDGE_SOURCE_DIR) + "/profiles/" + name);
    const auto p = LinkProfile::from_config(resolve_config(std::nullopt, flags));
    CHECK(p.delay_max_ms >= p.delay_min_ms);
  }
  Config zero;
  zero.set("link.profile", std::string(GRIDEDGE_SOURCE_DIR) + "/profiles/zero.conf");
  const auto p = LinkProfile::from_config(resolve_config(std::nullopt, zero));
  CHECK(p.delay_max_ms == 0.0);
  CHECK(p.bw_up_bps == std::numeric_limits<double>::infinity());
  CHECK(LinkProfile::from_config(resolve_config(std::nullopt, {})) == LinkProfile::default_5g_sa());
}

TEST_CASE("preset sits between the defaults and the file") {
  TempDir dir;
  Config preset;
  preset.set("run.id", "preset");
  preset.set("run.mode", "dsa");
  const auto file = write(dir.path / "f.conf", "run.id = file\n");
  const auto c = resolve_config(file, {}, preset);
  CHECK(c.find("run.id") == "file");
  CHECK(c.find("run.mode") == "dsa");
  CHECK(c.find("run.k") == "10");
}

TEST_CASE("unknown keys are rejected wherever they appear") {
  TempDir dir;
  const auto bad_file = write(dir.path / "bad.conf", "run.idd = x\n");
  CHECK_THROWS_AS(resolve_config(bad_file, {}), Error);
  Config flags;
  flags.set("nope.key", "1");
  CHECK_THROWS_AS(resolve_config(std::nullopt, flags), Error);
  const auto bad_profile = write(dir.path / "p.conf", "run.id = x\n");
  Config with_profile;
  with_profile.set("link.profile", bad_profile);
  CHECK_THROWS_AS(resolve_config(std::nullopt, with_profile), Error);
  CHECK_THROWS_AS(resolve_config((dir.path / "missing.conf").string(), {}), Error);
}

TEST_CASE("manifest from config") {
  Config flags;
  flags.set("run.id", "abc");
  flags.set("run.mode", "dsa");
  flags.set("run.regions", "3, 1");
  flags.set("run.clear_branch", "4");
  flags.set("run.error_dist", "uniform");
  const auto m = manifest_from_config(resolve_config(std::nullopt, flags));
  CHECK(m.run_id == "abc");
  CHECK(m.mode == msg::RunMode::Dsa);
  CHECK(m.expected_regions == std::set<RegionId>{1, 3});
  CHECK(m.fault.cleared_branch == 4);
  CHECK(m.dsa.error.dist == ErrorDistribution::Uniform);
  CHECK(m.dsa.n_raw == 200);
  CHECK(m.dsa.k == 10);

  const auto plain = manifest_from_config(resolve_config(std::nullopt, {}));
  CHECK_FALSE(plain.fault.cleared_branch.has_value());

  Config bad;
  bad.set("run.mode", "both");
  CHECK_THROWS_AS(manifest_from_config(resolve_config(std::nullopt, bad)), Error);
  Config bad_id;
  bad_id.set("run.id", "has space");
  CHECK_THROWS_AS(manifest_from_config(resolve_config(std::nullopt, bad_id)), Error);
}

TEST_CASE("every key is documented in the config reference") {
  std::ifstream in(std::string(GRIDEDGE_SOURCE_DIR) + "/docs/CONFIG.md");
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto doc = ss.str();
  for (const auto& k : known_keys()) {
    CAPTURE(k.key);
    CHECK(doc.find("`" + std::string(k.key) + "`") != std::string::npos);
    if (!k.flag.empty()) CHECK(doc.find("`" + std::string(k.flag) + "`") != std::string::npos);
  }
}
