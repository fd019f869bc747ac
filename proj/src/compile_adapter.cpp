#include "chiselforge/compile_adapter.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chiselforge/diagnostics.hpp"
#include "chiselforge/process.hpp"
#include "json.hpp"

namespace chiselforge {

namespace fs = std::filesystem;

namespace {

constexpr const char* kContractFile = "scaffold.json";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_contained_relative(const std::string& rel) {
  if (rel.empty()) return false;
  fs::path p(rel);
  if (p.is_absolute()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

fs::path make_unique_dir(const fs::path& root) {
  fs::create_directories(root);
  std::string templ = (root / "ws-XXXXXX").string();
  std::vector<char> buf(templ.begin(), templ.end());
  buf.push_back('\0');
  if (::mkdtemp(buf.data()) == nullptr) {
    throw std::runtime_error("cannot create workspace under " + root.string());
  }
  return fs::path(buf.data());
}

ErrorEntry synthetic_entry(std::string message) {
  ErrorEntry e;
  e.kind = ErrorKind::Syntax;
  e.message = std::move(message);
  e.location_signature = location_signature(e);
  return e;
}

}  // namespace

ScaffoldContract ScaffoldContract::load(const fs::path& scaffold_dir) {
  const auto file = scaffold_dir / kContractFile;
  if (!fs::is_regular_file(file)) {
    throw ToolchainError("scaffold contract missing: " + file.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ToolchainError("scaffold contract is not valid JSON: " + std::string(e.what()));
  }
  ScaffoldContract c;
  try {
    c.module_slot = j.at("module_slot").get<std::string>();
    c.entry_command = j.at("entry_command").get<std::string>();
    c.output_path = j.at("output_path").get<std::string>();
    c.pinned_versions = j.at("pinned_versions").get<std::map<std::string, std::string>>();
    c.probe_command = j.value("probe_command", "");
    c.env = j.value("env", std::map<std::string, std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ToolchainError("scaffold contract " + file.string() + ": " + e.what());
  }
  if (!is_contained_relative(c.module_slot) || !is_contained_relative(c.output_path)) {
    throw ToolchainError("scaffold contract paths must be relative and stay inside the scaffold");
  }
  if (c.entry_command.empty()) throw ToolchainError("scaffold contract has an empty entry_command");
  if (c.pinned_versions.empty()) {
    throw ToolchainError("scaffold contract declares no pinned_versions; unpinned toolchains are refused");
  }
  return c;
}

fs::path prepare_workspace(const Candidate& candidate, const fs::path& scaffold,
                           const fs::path& workspace_root) {
  if (!fs::is_directory(scaffold)) throw std::runtime_error("scaffold directory missing: " + scaffold.string());
  const auto contract = ScaffoldContract::load(scaffold);
  const auto ws = make_unique_dir(workspace_root);
  fs::copy(scaffold, ws, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
  const auto slot = ws / contract.module_slot;
  fs::create_directories(slot.parent_path());
  std::ofstream out(slot, std::ios::binary | std::ios::trunc);
  out << candidate.chisel_src;
  if (!out) throw std::runtime_error("cannot write candidate to " + slot.string());
  return ws;
}

CompileResult compile(const fs::path& workspace, const ScaffoldContract& contract, double timeout_s,
                      const std::string& top_module, const ErrorCatalog& catalog) {
  fs::create_directories(workspace / ".tmp");
  fs::create_directories(workspace / ".home");
  std::map<std::string, std::string> env = contract.env;
  env["TMPDIR"] = (workspace / ".tmp").string();
  env["HOME"] = (workspace / ".home").string();
  env["CHISELFORGE_TOP"] = top_module;
  env["CHISELFORGE_MODULE_SLOT"] = contract.module_slot;
  env["CHISELFORGE_OUTPUT"] = contract.output_path;

  const auto proc = run_shell(contract.entry_command, workspace, timeout_s, env);
  CompileResult r;
  r.raw_log = proc.output;
  r.wall_time_s = proc.wall_time_s;
  if (proc.timed_out) {
    r.status = CompileStatus::Timeout;
    return r;
  }
  const auto out_file = workspace / contract.output_path;
  if (proc.exit_code == 0) {
    if (fs::is_regular_file(out_file)) {
      r.verilog_src = read_file(out_file);
    }
    if (!r.verilog_src.empty()) {
      r.status = CompileStatus::Ok;
      return r;
    }
    r.status = CompileStatus::Failed;
    r.unparsed = true;
    r.entries.push_back(synthetic_entry("toolchain exited 0 without emitting " + contract.output_path));
    return r;
  }
  r.status = CompileStatus::Failed;
  r.entries = parse_diagnostics(proc.output, catalog);
  if (r.entries.empty()) {
    r.unparsed = true;
    r.entries.push_back(synthetic_entry(proc.spawn_failed
                                            ? "toolchain could not be started: " + proc.output
                                            : "toolchain exited with status " +
                                                  std::to_string(proc.exit_code) + " and no output"));
  } else if (r.entries.size() == 1 && !r.entries.front().location &&
             !r.entries.front().catalog_class) {
    r.unparsed = true;
  }
  return r;
}

ToolchainCompiler::ToolchainCompiler(ToolchainCompilerOptions options) : options_(std::move(options)) {
  if (!fs::is_directory(options_.scaffold_dir)) {
    throw ToolchainError("scaffold directory missing: " + options_.scaffold_dir.string());
  }
  contract_ = ScaffoldContract::load(options_.scaffold_dir);
  for (const auto& [tool, version] : options_.expected_versions) {
    auto it = contract_.pinned_versions.find(tool);
    if (it == contract_.pinned_versions.end() || it->second != version) {
      throw ToolchainError("scaffold pins " + tool + "=" +
                           (it == contract_.pinned_versions.end() ? std::string("<none>") : it->second) +
                           " but " + version + " is required");
    }
  }
  if (options_.workspace_root.empty()) {
    options_.workspace_root = fs::temp_directory_path() / "chiselforge-ws";
  }
}

CompileResult ToolchainCompiler::compile_candidate(const Candidate& candidate, const CaseSpec& spec,
                                                   double timeout_s) {
  const auto ws = prepare_workspace(candidate, options_.scaffold_dir, options_.workspace_root);
  auto result = compile(ws, contract_, timeout_s, spec.module_name);
  if (!options_.keep_workspaces) {
    std::error_code ec;
    fs::remove_all(ws, ec);
  }
  return result;
}

}  // namespace chiselforge
