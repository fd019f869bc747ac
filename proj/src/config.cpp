#include "chiselforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "chiselforge/serialization.hpp"

namespace chiselforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key " + where + "." + key);
  }
}

fs::path resolve(const fs::path& base, const json& v) {
  fs::path p = v.get<std::string>();
  return p.empty() || p.is_absolute() ? p : base / p;
}

}  // namespace

AppConfig default_app_config() {
  AppConfig c;
  c.provider.endpoint = "https://api.openai.com/v1/chat/completions";
  c.provider.model_id = "gpt-4o";
  c.provider.api_key_env = "OPENAI_API_KEY";
  c.run.model_id = c.provider.model_id;
  c.compiler.workspace_root = fs::temp_directory_path() / "chiselforge-ws";
  c.simulator.workspace_root = fs::temp_directory_path() / "chiselforge-sim";
  return c;
}

AppConfig parse_app_config(const std::string& json_text, const fs::path& base_dir) {
  AppConfig c = default_app_config();
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"run", "provider", "compiler", "simulator", "limits", "prompts_dir", "catalog_path", "mock_playlist",
              "abort_after_infra_failures"});
  try {
    if (j.contains("run")) {
      check_keys(j["run"], "run",
                 {"max_iterations", "trials", "k_values", "model_id", "sampling", "compile_timeout_s", "sim_timeout_s",
                  "llm_timeout_s", "parallelism", "escape_enabled", "seed"});
      const auto& sampling = j["run"].contains("sampling") ? j["run"]["sampling"] : json::object();
      if (sampling.is_object()) {
        check_keys(sampling, "run.sampling", {"mode", "temperature", "top_p"});
        const std::string mode = sampling.value("mode", "default");
        if (mode != "default" && mode != "explicit") throw ConfigError("run.sampling.mode must be default or explicit");
      }
      const std::string default_model = c.run.model_id;
      c.run = j["run"].get<RunConfig>();
      if (!j["run"].contains("model_id")) c.run.model_id = default_model;
      if (c.run.model_id.empty()) c.run.model_id = c.provider.model_id;
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      check_keys(p, "provider",
                 {"endpoint", "api_key_env", "max_retries", "backoff_initial_s", "backoff_max_s", "requests_per_minute"});
      c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
      c.provider.api_key_env = p.value("api_key_env", c.provider.api_key_env);
      c.provider.max_retries = p.value("max_retries", c.provider.max_retries);
      c.provider.backoff_initial_s = p.value("backoff_initial_s", c.provider.backoff_initial_s);
      c.provider.backoff_max_s = p.value("backoff_max_s", c.provider.backoff_max_s);
      c.provider.requests_per_minute = p.value("requests_per_minute", c.provider.requests_per_minute);
    }
    if (j.contains("compiler")) {
      const auto& p = j["compiler"];
      check_keys(p, "compiler", {"scaffold_dir", "workspace_root", "expected_versions", "keep_workspaces"});
      if (p.contains("scaffold_dir")) c.compiler.scaffold_dir = resolve(base_dir, p["scaffold_dir"]);
      if (p.contains("workspace_root")) c.compiler.workspace_root = resolve(base_dir, p["workspace_root"]);
      c.compiler.expected_versions = p.value("expected_versions", c.compiler.expected_versions);
      c.compiler.keep_workspaces = p.value("keep_workspaces", c.compiler.keep_workspaces);
    }
    if (j.contains("simulator")) {
      const auto& p = j["simulator"];
      check_keys(p, "simulator", {"compile_command", "run_command", "workspace_root", "mismatch_cap", "keep_workspaces"});
      c.simulator.compile_command = p.value("compile_command", c.simulator.compile_command);
      c.simulator.run_command = p.value("run_command", c.simulator.run_command);
      if (p.contains("workspace_root")) c.simulator.workspace_root = resolve(base_dir, p["workspace_root"]);
      c.simulator.mismatch_cap = p.value("mismatch_cap", c.simulator.mismatch_cap);
      c.simulator.keep_workspaces = p.value("keep_workspaces", c.simulator.keep_workspaces);
    }
    if (j.contains("limits")) {
      check_keys(j["limits"], "limits", {"full_detail_window", "context_budget_chars"});
      c.limits.full_detail_window = j["limits"].value("full_detail_window", c.limits.full_detail_window);
      c.limits.context_budget_chars = j["limits"].value("context_budget_chars", c.limits.context_budget_chars);
    }
    if (j.contains("prompts_dir")) c.prompts_dir = resolve(base_dir, j["prompts_dir"]);
    if (j.contains("catalog_path")) c.catalog_path = resolve(base_dir, j["catalog_path"]);
    if (j.contains("mock_playlist")) c.mock_playlist = resolve(base_dir, j["mock_playlist"]);
    c.abort_after_infra_failures = j.value("abort_after_infra_failures", c.abort_after_infra_failures);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  c.provider.model_id = c.run.model_id;
  return c;
}

AppConfig load_app_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_app_config(ss.str(), fs::absolute(path).parent_path());
}

}  // namespace chiselforge
