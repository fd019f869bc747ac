#include "doctest.h"
#include "chiselforge/config.hpp"
#include "support.hpp"

using namespace chiselforge;
namespace fs = std::filesystem;

TEST_CASE("defaults") {
  const auto c = default_app_config();
  CHECK(c.provider.api_key_env == "OPENAI_API_KEY");
  CHECK(c.run.model_id == c.provider.model_id);
  CHECK(c.abort_after_infra_failures == 5);
  CHECK(c.prompts_dir.empty());
}

TEST_CASE("empty object keeps defaults") {
  const auto c = parse_app_config("{}", "/base");
  CHECK(c.run == default_app_config().run);
  CHECK(c.provider.endpoint == default_app_config().provider.endpoint);
}

TEST_CASE("fields are read and relative paths resolve against the file") {
  const auto c = parse_app_config(R"({
    "run": {"max_iterations": 4, "trials": 3, "k_values": [1, 3], "parallelism": 2,
            "sampling": {"mode": "explicit", "temperature": 0.2, "top_p": 0.95}},
    "provider": {"endpoint": "http://localhost:8000/v1/chat/completions", "api_key_env": "LOCAL_KEY",
                 "max_retries": 1},
    "compiler": {"scaffold_dir": "scaffold", "expected_versions": {"chisel": "6.5.0"}},
    "simulator": {"run_command": "vvp sim.vvp", "workspace_root": "/abs/sim"},
    "limits": {"context_budget_chars": 9000},
    "prompts_dir": "prompts",
    "mock_playlist": "mock.json",
    "abort_after_infra_failures": 2
  })", "/etc/cf");
  CHECK(c.run.max_iterations == 4);
  CHECK(c.run.k_values == std::vector<int>{1, 3});
  CHECK_FALSE(c.run.sampling.provider_default);
  CHECK(c.run.sampling.temperature == 0.2);
  CHECK(c.run.model_id == "gpt-4o");
  CHECK(c.provider.model_id == "gpt-4o");
  CHECK(c.provider.api_key_env == "LOCAL_KEY");
  CHECK(c.provider.max_retries == 1);
  CHECK(c.compiler.scaffold_dir == fs::path("/etc/cf/scaffold"));
  CHECK(c.compiler.expected_versions.at("chisel") == "6.5.0");
  CHECK(c.simulator.run_command == "vvp sim.vvp");
  CHECK(c.simulator.workspace_root == fs::path("/abs/sim"));
  CHECK(c.limits.context_budget_chars == 9000);
  CHECK(c.prompts_dir == fs::path("/etc/cf/prompts"));
  CHECK(c.mock_playlist == fs::path("/etc/cf/mock.json"));
  CHECK(c.abort_after_infra_failures == 2);
}

TEST_CASE("model id flows from run to provider") {
  const auto c = parse_app_config(R"({"run": {"model_id": "local-llama"}})", "/");
  CHECK(c.provider.model_id == "local-llama");
}

TEST_CASE("unknown keys, wrong types and bad JSON are rejected") {
  CHECK_THROWS_AS(parse_app_config("{", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"runn": {}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"run": {"max_iter": 3}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"provider": {"api_key": "sk-inline"}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"run": {"trials": "ten"}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"limits": []})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"run": {"sampling": {"provider_default": false}}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"run": {"sampling": {"mode": "greedy"}}})", "/"), ConfigError);
  CHECK_THROWS_AS(parse_app_config(R"({"run": {"sampling": "hot"}})", "/"), ConfigError);
}

TEST_CASE("load_app_config reads a file") {
  cftest::TempDir d;
  cftest::write_file(d / "cf.json", R"({"prompts_dir": "p"})");
  CHECK(load_app_config(d / "cf.json").prompts_dir == fs::absolute(d.path()) / "p");
  CHECK_THROWS_AS(load_app_config(d / "missing.json"), ConfigError);
}
