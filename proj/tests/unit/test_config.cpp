#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hapt/config.hpp"

using namespace hapt;
using nlohmann::json;

TEST(Config, DefaultsAreValid) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.tau_config().supports.size(), default_config(4).supports.size());
  EXPECT_EQ(fingerprint(c.tau_config()), fingerprint(default_config(4)));
  EXPECT_FALSE(c.domain.has_value());
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.depth = 7;
  c.domain = Interval{-1.5, 2.25};
  c.state_count = 3;
  c.beta_tau = 0.5;
  c.boundaries_nu = {0.5, 3.0, 30.0};
  c.root_dist_tau = {0.2, 0.3, 0.5};
  c.quadrature.tolerance = 1e-9;
  c.quadrature.outer_budget = 500;
  c.grid = 33;
  c.dpm.alpha = 0.7;
  c.dpm.draws = 12;
  c.seed = 1234567890123ull;
  c.threads = 3;
  c.output_dir = "out dir";
  c.scenario = "clust_het";
  c.dirichlet_total = 2.5;
  const auto back = config_from_json(json::parse(to_json(c).dump()));
  EXPECT_EQ(back, c);
  const RunConfig d;
  EXPECT_EQ(config_from_json(json::parse(to_json(d).dump())), d);
  EXPECT_EQ(to_json(d)["domain"], "auto");
}

TEST(Config, MissingFieldsKeepBase) {
  RunConfig base;
  base.depth = 5;
  base.seed = 77;
  const auto c = config_from_json(json{{"grid", 64}}, base);
  EXPECT_EQ(c.depth, 5);
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.grid, 64u);
  const auto e = config_from_json(json{{"dpm", {{"burnin", 3}}}});
  EXPECT_EQ(e.dpm.burnin, 3u);
  EXPECT_EQ(e.dpm.draws, RunConfig{}.dpm.draws);
}

TEST(Config, RejectsBadFields) {
  EXPECT_THROW(config_from_json(json{{"depht", 3}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"dpm", {{"sweeps", 3}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"grid", -4}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"grid", 2.5}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"depth", "ten"}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"depth", 31}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"schema_version", 2}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"domain", "wide"}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"domain", {2.0, 1.0}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"boundaries_tau", {1.0, 2.0}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"root_dist_nu", {0.5, 0.5, 0.5, 0.5}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"quadrature", {{"tolerance", 0.0}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"dpm", {{"alpha", -1.0}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"threads", 0}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"scenario", "s9"}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json::array({1, 2})), InvalidArgument);
}

TEST(Config, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "hapt_config_test";
  std::filesystem::create_directories(dir);
  const auto good = (dir / "good.json").string();
  std::ofstream(good) << R"({"depth": 6, "domain": [0, 10]})";
  const auto c = load_config(good);
  EXPECT_EQ(c.depth, 6);
  ASSERT_TRUE(c.domain.has_value());
  EXPECT_EQ(c.domain->hi, 10.0);
  const auto bad = (dir / "bad.json").string();
  std::ofstream(bad) << "{depth: 6";
  EXPECT_THROW(load_config(bad), InvalidArgument);
  EXPECT_THROW(load_config((dir / "missing.json").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Config, ReferenceListsEveryField) {
  const auto ref = config_reference();
  const auto j = to_json(RunConfig{});
  for (const auto& [key, value] : j.items())
    EXPECT_NE(ref.find("`" + key + "`"), std::string::npos) << key;
}
