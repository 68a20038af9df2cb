#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "specshape/error.hpp"
#include "specshape/run_config.hpp"

using namespace specshape;
using nlohmann::json;

TEST_CASE("run config: defaults and round trip") {
  const RunConfig d;
  CHECK(d.train.alpha == 1e-4);
  CHECK(d.train.k == 30);
  CHECK(d.train.batch == 16);
  CHECK(d.train.lr == 1e-4);
  CHECK(d.count == 600);

  RunConfig c;
  c.family = FamilySpec::defaults(FamilyKind::contour2d);
  c.family.seed = 9;
  c.first_index = 5;
  c.count = 40;
  c.order = FemOrder::linear;
  c.train.k = 12;
  c.train.use_rho = false;
  c.cache = "/tmp/cache";
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.dataset_options().k == 12);
  CHECK(back.dataset_options().first_index == 5);
}

TEST_CASE("run config: unknown keys and bad values") {
  CHECK_THROWS_AS(RunConfig::from_json(json{{"extra", 1}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"data", {{"cuont", 1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"paths", {{"cache", 3}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"train", {{"lr", -1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"family", {{"kind", "blob3d"}, {"colour", 1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"data", {{"count", 4}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"data", {{"order", "quadratic"}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json(json{{"family", {{"kind", "contour2d"}}}, {"data", {{"input", "pointcloud"}}}}),
      ConfigError);
}

TEST_CASE("config hash is FNV-1a over the canonical dump") {
  // FNV-1a 64 of the single byte '1', computed independently.
  CHECK(config_hash(json::parse("1")) == "af63ac4c86019afc");
  // Key order in the source text does not matter.
  CHECK(config_hash(json::parse(R"({"a": 1, "b": 2})")) == config_hash(json::parse(R"({"b": 2, "a": 1})")));
  CHECK(config_hash(json{{"a", 1}}) != config_hash(json{{"a", 2}}));
}

TEST_CASE("run manifest fields") {
  const json m = run_manifest("train", {{"x", 1}}, {{"train", 7}}, {{"checkpoint", "m.ckpt"}});
  CHECK(m["command"] == "train");
  CHECK(m["config_hash"] == config_hash(json{{"x", 1}}));
  CHECK(m["seeds"]["train"] == 7);
  CHECK(!m["git_revision"].get<std::string>().empty());
}

TEST_CASE("dataset manifest reproduces its draws") {
  DataManifest m;
  m.family = FamilySpec::defaults(FamilyKind::blob3d);
  m.first_index = 3;
  m.count = 4;
  for (int i = 0; i < 4; ++i) m.samples.push_back(m.family.draw(3 + i));
  const auto dir = std::filesystem::temp_directory_path() / "specshape_manifest_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "manifest.json") << m.to_json().dump();
  const DataManifest back = DataManifest::load(dir);
  CHECK(back.count == 4);
  CHECK(back.samples[2].style == m.samples[2].style);

  json tampered = m.to_json();
  tampered["samples"][1]["style"][0] = 1.2345;
  std::ofstream(dir / "manifest.json") << tampered.dump();
  CHECK_THROWS_AS(DataManifest::load(dir), DataError);

  tampered = m.to_json();
  tampered["count"] = 5;
  CHECK_THROWS_AS(DataManifest::from_json(tampered), DataError);
  std::filesystem::remove_all(dir);
}
