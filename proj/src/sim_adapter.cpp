#include "chiselforge/sim_adapter.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "chiselforge/compile_adapter.hpp"
#include "chiselforge/process.hpp"

namespace chiselforge {

namespace fs = std::filesystem;

namespace {

const std::regex kCheckLine(R"(^\s*CHECK\s+(\S+)\s+IN=(.*?)\s+EXP=(.*?)\s+GOT=(.*?)\s+(PASS|FAIL)\s*$)");
const std::regex kMismatchSummary(R"(Mismatches:\s*(\d+)\s+in\s+(\d+)\s+samples)");
const std::regex kOutputHint(
    R"(Output '([^']+)' has (\d+) mismatch(?:es)?\.(?:\s*First mismatch occurred at time (\d+))?)");
const std::regex kRtllmSummary(R"(Test completed with\s*(\d+)\s*/\s*(\d+)\s*failures)", std::regex::icase);
const std::regex kRtllmPass(R"(Your Design Passed)", std::regex::icase);
const std::regex kModuleDecl(R"(\bmodule\s+([A-Za-z_][\w$]*))");

std::string head_of(std::string_view log, std::size_t max_chars) {
  std::string s(log.substr(0, std::min(log.size(), max_chars)));
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
    text.replace(pos, token.size(), value);
  }
  return text;
}

std::string first_word(const std::string& command) {
  std::istringstream in(command);
  std::string w;
  in >> w;
  return w;
}

}  // namespace

MismatchScan parse_mismatches(std::string_view raw_log, std::size_t cap) {
  MismatchScan scan;
  std::istringstream in{std::string(raw_log)};
  std::string line;
  int checks = 0;
  int check_failures = 0;
  std::optional<std::pair<int, int>> summary;
  std::vector<MismatchEntry> hints;
  bool design_passed = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, kCheckLine)) {
      ++checks;
      if (m[5] == "FAIL") {
        ++check_failures;
        if (scan.entries.size() < cap) {
          scan.entries.push_back({m[1].str(), m[2].str(), m[3].str(), m[4].str(), std::nullopt});
        }
      }
      continue;
    }
    if (std::regex_search(line, m, kMismatchSummary) || std::regex_search(line, m, kRtllmSummary)) {
      summary = {std::stoi(m[1].str()), std::stoi(m[2].str())};
      continue;
    }
    if (std::regex_search(line, m, kOutputHint)) {
      MismatchEntry e;
      e.testpoint_id = m[1].str();
      e.expected = "0 mismatches";
      e.actual = m[2].str() + " mismatches";
      if (m[3].matched) e.time = std::stod(m[3].str());
      hints.push_back(std::move(e));
      continue;
    }
    if (std::regex_search(line, kRtllmPass)) design_passed = true;
  }

  if (checks > 0) {
    scan.recognized = true;
    scan.failed_count = check_failures;
    scan.total_count = checks;
    return scan;
  }
  if (summary) {
    scan.recognized = true;
    scan.failed_count = summary->first;
    scan.total_count = std::max(summary->second, summary->first);
    if (scan.failed_count > 0) {
      if (hints.empty()) {
        MismatchEntry agg;
        agg.testpoint_id = "summary";
        agg.expected = "0 mismatches";
        agg.actual = std::to_string(scan.failed_count) + " mismatches in " +
                     std::to_string(scan.total_count) + " samples";
        scan.entries.push_back(std::move(agg));
      } else {
        for (auto& h : hints) {
          if (scan.entries.size() >= cap) break;
          scan.entries.push_back(std::move(h));
        }
      }
    }
    return scan;
  }
  if (!hints.empty()) {
    scan.recognized = true;
    for (const auto& h : hints) scan.failed_count += std::stoi(h.actual);
    scan.total_count = scan.failed_count;
    for (auto& h : hints) {
      if (scan.entries.size() >= cap) break;
      scan.entries.push_back(std::move(h));
    }
    return scan;
  }
  if (design_passed) scan.recognized = true;
  return scan;
}

MismatchScan unparsed_failure(std::string_view raw_log, int exit_code) {
  MismatchScan scan;
  scan.unparsed = true;
  scan.failed_count = 1;
  scan.total_count = 1;
  MismatchEntry e;
  e.testpoint_id = "unparsed";
  e.stimulus = head_of(raw_log, 400);
  e.expected = "a passing simulation";
  e.actual = exit_code == 0 ? "no check results in the simulation log"
                            : "simulator exited with status " + std::to_string(exit_code);
  scan.entries.push_back(std::move(e));
  return scan;
}

std::vector<std::string> declared_modules(std::string_view verilog_src) {
  std::vector<std::string> out;
  const std::string src(verilog_src);
  for (auto it = std::sregex_iterator(src.begin(), src.end(), kModuleDecl); it != std::sregex_iterator();
       ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

SimWorkspace assemble_sim(const std::string& verilog_src, const CaseSpec& spec, const fs::path& workspace_root) {
  if (verilog_src.empty()) throw PreconditionError("assemble_sim needs Verilog source");
  if (spec.testbench_src.empty()) throw PreconditionError("case " + spec.case_id + " has no testbench");
  fs::create_directories(workspace_root);
  std::string templ = (workspace_root / "sim-XXXXXX").string();
  std::vector<char> buf(templ.begin(), templ.end());
  buf.push_back('\0');
  if (::mkdtemp(buf.data()) == nullptr) throw std::runtime_error("cannot create simulation workspace");

  SimWorkspace ws;
  ws.dir = buf.data();
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(ws.dir / name, std::ios::binary);
    out << text;
    ws.sources.emplace_back(name);
  };
  write("dut.v", verilog_src);
  write("tb.v", spec.testbench_src);
  if (spec.reference_src && !spec.reference_src->empty()) write("ref.v", *spec.reference_src);

  const auto modules = declared_modules(verilog_src);
  if (std::find(modules.begin(), modules.end(), spec.module_name) == modules.end()) {
    std::string found;
    for (const auto& m : modules) found += (found.empty() ? "" : ", ") + m;
    ws.build_error = "The testbench instantiates module '" + spec.module_name +
                     "' but the generated Verilog declares " +
                     (found.empty() ? std::string("no module") : "only: " + found) +
                     ". Name the top-level Chisel module '" + spec.module_name +
                     "' and keep the port names from the specification.";
  }
  return ws;
}

SimResult simulate(const SimWorkspace& workspace, const SimulatorConfig& config, double timeout_s,
                   long seed, const std::string& top_module) {
  SimResult r;
  if (workspace.build_error) {
    r.status = SimStatus::BuildError;
    r.raw_log = *workspace.build_error;
    return r;
  }
  std::string sources;
  for (const auto& s : workspace.sources) sources += (sources.empty() ? "" : " ") + s.string();
  auto expand = [&](std::string cmd) {
    cmd = substitute(std::move(cmd), "sources", sources);
    cmd = substitute(std::move(cmd), "top", top_module);
    return substitute(std::move(cmd), "seed", std::to_string(seed));
  };

  const auto start = std::chrono::steady_clock::now();
  auto remaining = [&] {
    return timeout_s - std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  if (!config.compile_command.empty()) {
    const auto build = run_shell(expand(config.compile_command), workspace.dir, timeout_s);
    r.raw_log = build.output;
    if (build.timed_out) {
      r.status = SimStatus::Timeout;
      r.wall_time_s = build.wall_time_s;
      return r;
    }
    if (build.exit_code != 0) {
      r.status = SimStatus::BuildError;
      r.wall_time_s = build.wall_time_s;
      return r;
    }
  }
  const double left = remaining();
  if (left <= 0) {
    r.status = SimStatus::Timeout;
    r.wall_time_s = timeout_s;
    return r;
  }
  const auto run = run_shell(expand(config.run_command), workspace.dir, left);
  r.raw_log += run.output;
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (run.timed_out) {
    r.status = SimStatus::Timeout;
    return r;
  }

  auto scan = parse_mismatches(run.output, config.mismatch_cap);
  if (scan.recognized && scan.failed_count == 0 && run.exit_code == 0) {
    r.status = SimStatus::Pass;
    r.total_count = scan.total_count;
    return r;
  }
  if (scan.failed_count == 0) scan = unparsed_failure(run.output, run.exit_code);
  r.status = SimStatus::Fail;
  r.mismatches = std::move(scan.entries);
  r.failed_count = scan.failed_count;
  r.total_count = scan.total_count;
  return r;
}

ToolchainSimulator::ToolchainSimulator(SimulatorConfig config) : config_(std::move(config)) {
  for (const auto* cmd : {&config_.compile_command, &config_.run_command}) {
    if (cmd->empty()) continue;
    const auto prog = first_word(*cmd);
    if (find_program(prog).empty()) throw ToolchainError("simulator program not found on PATH: " + prog);
  }
  if (config_.workspace_root.empty()) config_.workspace_root = fs::temp_directory_path() / "chiselforge-sim";
}

SimResult ToolchainSimulator::simulate_candidate(const std::string& verilog_src, const CaseSpec& spec,
                                                 double timeout_s, long seed) {
  const auto ws = assemble_sim(verilog_src, spec, config_.workspace_root);
  auto result = simulate(ws, config_, timeout_s, spec.seed.value_or(seed), spec.module_name);
  if (!config_.keep_workspaces) {
    std::error_code ec;
    fs::remove_all(ws.dir, ec);
  }
  return result;
}

}  // namespace chiselforge
