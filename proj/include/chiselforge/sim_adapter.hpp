#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chiselforge/domain.hpp"

namespace chiselforge {

inline constexpr std::size_t kDefaultMismatchCap = 16;

/// What a simulation log says about functional points.
struct MismatchScan {
  std::vector<MismatchEntry> entries;  // at most the configured cap
  int failed_count = 0;                // never capped
  int total_count = 0;
  bool recognized = false;  // at least one check line or summary was found
  bool unparsed = false;    // the single entry is a placeholder for an unreadable log
};

/// Reads per-check lines
///   CHECK <id> IN=<stimulus> EXP=<expected> GOT=<actual> <PASS|FAIL>
/// and the summary forms used by existing benchmark testbenches
/// ("Mismatches: N in M samples", "Output 'x' has N mismatches. First
/// mismatch occurred at time T.", "Test completed with N / M failures",
/// "Your Design Passed"). Per-output hints become one entry per output;
/// a bare summary becomes one aggregate entry.
MismatchScan parse_mismatches(std::string_view raw_log, std::size_t cap = kDefaultMismatchCap);

/// MismatchScan for a nonzero simulator exit with an unreadable log.
MismatchScan unparsed_failure(std::string_view raw_log, int exit_code);

enum class SimStatus { Pass, Fail, Timeout, BuildError };

struct SimResult {
  SimStatus status = SimStatus::Fail;
  std::vector<MismatchEntry> mismatches;
  int failed_count = 0;
  int total_count = 0;
  std::string raw_log;
  double wall_time_s = 0;
};

class SimAdapter {
 public:
  virtual ~SimAdapter() = default;
  virtual SimResult simulate_candidate(const std::string& verilog_src, const CaseSpec& spec,
                                       double timeout_s, long seed) = 0;
};

struct SimWorkspace {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> sources;  // relative to dir
  std::optional<std::string> build_error;
};

/// Names of the modules a Verilog source declares, in order.
std::vector<std::string> declared_modules(std::string_view verilog_src);

/// Writes dut.v, tb.v and (when present) ref.v into a fresh directory.
/// A DUT that does not declare the case's module name gives a workspace
/// with build_error set.
SimWorkspace assemble_sim(const std::string& verilog_src, const CaseSpec& spec,
                          const std::filesystem::path& workspace_root);

/// Commands for an event-driven Verilog simulator. Placeholders:
/// {sources} space-separated source files, {top} module name, {seed}.
struct SimulatorConfig {
  std::string compile_command = "iverilog -g2012 -DSEED={seed} -o sim.vvp {sources}";
  std::string run_command = "vvp -n sim.vvp +seed={seed}";
  std::filesystem::path workspace_root;
  std::size_t mismatch_cap = kDefaultMismatchCap;
  bool keep_workspaces = false;
};

/// Compiles and runs an assembled workspace under one overall deadline.
SimResult simulate(const SimWorkspace& workspace, const SimulatorConfig& config, double timeout_s,
                   long seed, const std::string& top_module = "");

class ToolchainSimulator : public SimAdapter {
 public:
  /// Throws ToolchainError when the simulator programs are not on PATH.
  explicit ToolchainSimulator(SimulatorConfig config);

  SimResult simulate_candidate(const std::string& verilog_src, const CaseSpec& spec,
                               double timeout_s, long seed) override;

 private:
  SimulatorConfig config_;
};

}  // namespace chiselforge
