#include "doctest.h"
#include "fixture_util.hpp"

#include "moralscope/config.hpp"
#include "moralscope/pipeline.hpp"

#include <json.hpp>

#include <fstream>
#include <regex>

using namespace moralscope;
namespace fs = std::filesystem;

using fixtures::toy_config;

TEST_CASE("document parsing") {
  const auto d = config::Document::parse(
      "# comment\n"
      "[a]\n"
      "s = \"x # not a comment\"  # trailing\n"
      "i = -3\n"
      "f = 2.5e-1\n"
      "b = false\n"
      "arr = [\"p\", \"q\"]\n"
      "nums = [1, 2,3]\n"
      "flags = [true, false]\n");
  CHECK(d.get_string("a", "s") == "x # not a comment");
  CHECK(d.get_int("a", "i") == -3);
  CHECK(d.get_double("a", "f") == 0.25);
  CHECK(d.get_double("a", "i") == -3.0);
  CHECK_FALSE(d.get_bool("a", "b"));
  CHECK(d.get_strings("a", "arr") == std::vector<std::string>{"p", "q"});
  CHECK(d.get_ints("a", "nums") == std::vector<std::int64_t>{1, 2, 3});
  CHECK(d.get_bools("a", "flags") == std::vector<bool>{true, false});
  CHECK(d.get_int("a", "missing", 7) == 7);
  CHECK_THROWS_AS(d.get_int("a", "missing"), config::ConfigError);
  CHECK_THROWS_AS(d.get_int("a", "s"), config::ConfigError);

  CHECK_THROWS_AS(config::Document::parse("[a]\nx = 1\nx = 2\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Document::parse("[a\nx = 1\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Document::parse("[a]\nx = \"open\n"), config::ConfigError);
  CHECK_THROWS_AS(config::Document::parse("[a]\njust words\n"), config::ConfigError);
}

TEST_CASE("pipeline config validation") {
  const auto good = toy_config("cfg_good");
  const auto cfg = config::load_pipeline_config(good);
  CHECK(cfg.seed == 13);
  CHECK(cfg.model.embedding_dim == 16);
  CHECK(cfg.channels.size() == 3);
  CHECK(cfg.paths.posts.is_absolute());

  auto rewrite = [&](const std::string& name, const std::string& from, const std::string& to) {
    const auto dir = fixtures::scratch(name);
    std::string text = fixtures::read(good);
    text = std::regex_replace(text, std::regex(from), to);
    std::ofstream(dir / "config.toml") << text;
    return dir / "config.toml";
  };
  CHECK_THROWS_AS(config::load_pipeline_config(rewrite("cfg_noseed", "seed = 13", "")), config::ConfigError);
  CHECK_THROWS_AS(config::load_pipeline_config(rewrite("cfg_unknown", "\\[report\\]", "[report]\ncolour = \"red\"")),
                  config::ConfigError);
  CHECK_THROWS_AS(config::load_pipeline_config(rewrite("cfg_badpath", "posts\\.jsonl", "nope.jsonl")),
                  config::ConfigError);
  CHECK_THROWS_AS(config::load_pipeline_config(rewrite("cfg_badch", "\"global\", ", "\"sideways\", ")),
                  config::ConfigError);

  const auto rel = config::load_pipeline_config(fixtures::dir() / "pipeline" / "config.toml");
  CHECK(fs::exists(rel.paths.posts));
}

TEST_CASE("exit codes") {
  const auto cfg = toy_config("exit_codes");
  CHECK(pipeline::run("associate", cfg) == pipeline::kMissingStage);
  CHECK_FALSE(fs::exists(cfg.parent_path() / "out" / "associate"));
  CHECK(pipeline::run("ingest", fixtures::scratch("exit_missing") / "absent.toml") == pipeline::kConfigError);
  CHECK(pipeline::run("nonsense", cfg) == pipeline::kConfigError);

  const auto broken_dir = fixtures::scratch("exit_runtime");
  std::ofstream(broken_dir / "posts.jsonl") << "{bad\n{bad\n";
  std::string text = fixtures::read(cfg);
  text = std::regex_replace(text, std::regex(R"(posts = "[^"]*")"), "posts = \"" + (broken_dir / "posts.jsonl").string() + "\"");
  std::ofstream(broken_dir / "config.toml") << text;
  CHECK(pipeline::run("ingest", broken_dir / "config.toml") == pipeline::kRuntimeFailure);
}

TEST_CASE("ingest artifacts are versioned and reproducible") {
  const auto cfg_path = toy_config("versions");
  const auto out = cfg_path.parent_path() / "out";
  REQUIRE(pipeline::run("ingest", cfg_path) == pipeline::kOk);
  REQUIRE(pipeline::run("ingest", cfg_path) == pipeline::kOk);
  CHECK(pipeline::latest_artifact(out, "ingest").filename() == "v2");
  const auto m1 = nlohmann::json::parse(fixtures::read(out / "ingest" / "v1" / "manifest.json"));
  const auto m2 = nlohmann::json::parse(fixtures::read(out / "ingest" / "v2" / "manifest.json"));
  CHECK(m1.at("outputs") == m2.at("outputs"));
  CHECK(m1.at("config_hash") == m2.at("config_hash"));
  CHECK(m1.at("inputs") == m2.at("inputs"));

  REQUIRE(pipeline::run("label", cfg_path) == pipeline::kOk);
  const auto label = nlohmann::json::parse(fixtures::read(out / "label" / "v1" / "summary.json"));
  CHECK(label.at("instances").get<int>() > 0);
  CHECK(label.at("gender_counts").at("female").get<int>() > 0);
  const auto ml = nlohmann::json::parse(fixtures::read(out / "label" / "v1" / "manifest.json"));
  CHECK(ml.at("upstream").at("ingest").get<std::string>().ends_with("v2"));
}

TEST_CASE("file hash") {
  const auto d = fixtures::scratch("hash");
  std::ofstream(d / "empty");
  std::ofstream(d / "a") << "a";
  CHECK(pipeline::file_hash(d / "empty") == "cbf29ce484222325");
  CHECK(pipeline::file_hash(d / "a") == "af63dc4c8601ec8c");
}
