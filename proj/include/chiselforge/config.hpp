#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "chiselforge/compile_adapter.hpp"
#include "chiselforge/domain.hpp"
#include "chiselforge/llm_gateway.hpp"
#include "chiselforge/prompts.hpp"
#include "chiselforge/sim_adapter.hpp"

namespace chiselforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a CLI invocation needs, read from one JSON file. Relative
/// paths are resolved against the file's directory. Unknown keys are
/// rejected.
struct AppConfig {
  RunConfig run;
  ProviderConfig provider;
  ToolchainCompilerOptions compiler;
  SimulatorConfig simulator;
  PromptLimits limits;
  std::filesystem::path prompts_dir;   // empty: shipped templates
  std::filesystem::path catalog_path;  // empty: shipped catalog
  std::filesystem::path mock_playlist;
  int abort_after_infra_failures = 5;
};

AppConfig default_app_config();
AppConfig parse_app_config(const std::string& json_text, const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& path);

}  // namespace chiselforge
