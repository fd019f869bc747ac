#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace chiselforge {

struct ProcessSpec {
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  /// Variables set (or replaced) on top of the parent environment.
  std::map<std::string, std::string> env;
  double timeout_s = 60;
  std::size_t max_output_bytes = 8u << 20;
};

struct ProcessResult {
  int exit_code = -1;      // -1 when killed or never started
  std::string output;      // stdout and stderr interleaved
  bool timed_out = false;
  bool spawn_failed = false;
  double wall_time_s = 0;
};

/// Runs a command in its own process group with stdout and stderr merged.
/// At the deadline the whole group is killed.
ProcessResult run_process(const ProcessSpec& spec);

/// `/bin/sh -c command` in `cwd`.
ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        double timeout_s, std::map<std::string, std::string> env = {});

/// Resolves a program name against PATH. Empty when not found.
std::filesystem::path find_program(const std::string& name);

}  // namespace chiselforge
