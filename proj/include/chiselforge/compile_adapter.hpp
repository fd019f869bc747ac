#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chiselforge/catalog.hpp"
#include "chiselforge/domain.hpp"

namespace chiselforge {

/// Raised at adapter construction when a toolchain is missing or its
/// scaffold is unusable. Never raised per compile.
class ToolchainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Subprocess contract of a Chisel elaboration scaffold, read from
/// `<scaffold>/scaffold.json`.
struct ScaffoldContract {
  std::string module_slot;    // relative path the candidate source is written to
  std::string entry_command;  // run with /bin/sh -c from the workspace root
  std::string output_path;    // relative path of the emitted Verilog
  std::map<std::string, std::string> pinned_versions;
  std::string probe_command;  // optional toolchain self-check used by `doctor`
  std::map<std::string, std::string> env;

  static ScaffoldContract load(const std::filesystem::path& scaffold_dir);
};

enum class CompileStatus { Ok, Failed, Timeout };

struct CompileResult {
  CompileStatus status = CompileStatus::Failed;
  std::string verilog_src;
  std::string raw_log;
  std::vector<ErrorEntry> entries;
  bool unparsed = false;  // failed but no diagnostic was recognised
  double wall_time_s = 0;
};

/// What the reflection engine needs from a compiler.
class CompileAdapter {
 public:
  virtual ~CompileAdapter() = default;
  virtual CompileResult compile_candidate(const Candidate& candidate, const CaseSpec& spec,
                                          double timeout_s) = 0;
};

/// Copies the scaffold into a fresh directory under `workspace_root` and
/// installs the candidate source at the contract's module slot.
std::filesystem::path prepare_workspace(const Candidate& candidate,
                                        const std::filesystem::path& scaffold,
                                        const std::filesystem::path& workspace_root);

/// Runs the scaffold entry command inside a prepared workspace. TMPDIR and
/// HOME point inside the workspace.
CompileResult compile(const std::filesystem::path& workspace, const ScaffoldContract& contract,
                      double timeout_s, const std::string& top_module,
                      const ErrorCatalog& catalog = ErrorCatalog::builtin());

struct ToolchainCompilerOptions {
  std::filesystem::path scaffold_dir;
  std::filesystem::path workspace_root;
  /// Versions the scaffold must declare. Any difference is refused.
  std::map<std::string, std::string> expected_versions;
  bool keep_workspaces = false;
};

class ToolchainCompiler : public CompileAdapter {
 public:
  /// Validates the scaffold and its version pins; throws ToolchainError.
  explicit ToolchainCompiler(ToolchainCompilerOptions options);

  CompileResult compile_candidate(const Candidate& candidate, const CaseSpec& spec,
                                  double timeout_s) override;

  const ScaffoldContract& contract() const { return contract_; }

 private:
  ToolchainCompilerOptions options_;
  ScaffoldContract contract_;
};

}  // namespace chiselforge
