#include <doctest.h>

#include <fstream>

#include "neuracoustic/config.hpp"
#include "neuracoustic/errors.hpp"
#include "support/fixtures.hpp"

using namespace neuracoustic;

TEST_CASE("defaults validate") {
  CHECK_NOTHROW(default_run_config().validate());
}

TEST_CASE("TOML subset parsing") {
  const auto j = toml_subset_to_json(
      "seed = 7\n"
      "# a comment\n"
      "name = \"hello # not a comment\"\n"
      "flag = true\n"
      "[study]\n"
      "levels_db_spl = [50, 65.5]\n"
      "[periphery.fibers.ls]\n"
      "spont_rate_sp_s = 0.1\n");
  CHECK(j.at("seed").get<int>() == 7);
  CHECK(j.at("name").get<std::string>() == "hello # not a comment");
  CHECK(j.at("flag").get<bool>() == true);
  CHECK(j.at("study").at("levels_db_spl")[1].get<double>() == 65.5);
  CHECK(j.at("periphery").at("fibers").at("ls").at("spont_rate_sp_s")
            .get<double>() == 0.1);
  CHECK_THROWS_AS(toml_subset_to_json("key value-without-equals\n"), InputError);
  CHECK_THROWS_AS(toml_subset_to_json("x = \"unterminated\n"), InputError);
}

TEST_CASE("config round trip through TOML text") {
  fixtures::TempDir dir("cfg");
  RunConfig cfg = default_run_config();
  cfg.seed = 555;
  cfg.periphery.n_cf = 12;
  cfg.study.levels_db_spl = {65.0, 95.0};
  cfg.similarity.constants_rule = ConstantsRule::Standard;
  cfg.similarity.l_mode = LMode::PairMax;
  cfg.study.feature_mode = "product";

  const auto path = dir.path() / "run.toml";
  {
    std::ofstream out(path);
    out << config_to_toml(cfg);
  }
  const RunConfig back = load_run_config(path);
  CHECK(back.seed == 555);
  CHECK(back.periphery.n_cf == 12);
  CHECK(back.periphery.seed == 555);
  CHECK(back.study.levels_db_spl == std::vector<double>{65.0, 95.0});
  CHECK(back.similarity.constants_rule == ConstantsRule::Standard);
  CHECK(back.similarity.l_mode == LMode::PairMax);
  CHECK(back.study.feature_mode == "product");
}

TEST_CASE("config loads from JSON as well") {
  fixtures::TempDir dir("cfg");
  const auto path = dir.path() / "run.json";
  {
    std::ofstream out(path);
    out << R"({"seed": 99, "periphery": {"n_reps": 5}})";
  }
  const RunConfig cfg = load_run_config(path);
  CHECK(cfg.seed == 99);
  CHECK(cfg.periphery.n_reps == 5);
}

TEST_CASE("a config file must pin its seed") {
  fixtures::TempDir dir("cfg");
  const auto path = dir.path() / "no_seed.toml";
  {
    std::ofstream out(path);
    out << "jobs = 2\n";
  }
  CHECK_THROWS_WITH_AS(load_run_config(path), doctest::Contains("seed"),
                       InputError);
}

TEST_CASE("the PSTH bin and FT neurogram bin stay synchronized") {
  fixtures::TempDir dir("cfg");
  SUBCASE("periphery side set") {
    const auto path = dir.path() / "a.toml";
    {
      std::ofstream out(path);
      out << "seed = 1\n[periphery]\nft_bin_s = 2e-4\ninternal_rate_hz = 50000\n";
    }
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.neurogram.ft_bin_s == 2e-4);
  }
  SUBCASE("neurogram side wins when both appear") {
    const auto path = dir.path() / "b.toml";
    {
      std::ofstream out(path);
      out << "seed = 1\n[periphery]\nft_bin_s = 2e-4\n"
             "internal_rate_hz = 50000\n[neurogram]\nft_bin_s = 5e-4\n";
    }
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.periphery.ft_bin_s == 5e-4);
    CHECK(cfg.neurogram.ft_bin_s == 5e-4);
  }
}

TEST_CASE("invalid settings are named") {
  fixtures::TempDir dir("cfg");
  const auto path = dir.path() / "bad.toml";
  {
    std::ofstream out(path);
    out << "seed = 1\n[study]\nconditions = [\"sideways\"]\n";
  }
  CHECK_THROWS_WITH_AS(load_run_config(path),
                       doctest::Contains("unknown condition"), InputError);
}
