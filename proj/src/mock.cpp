#include "chiselforge/mock.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chiselforge/diagnostics.hpp"
#include "chiselforge/prompts.hpp"

namespace chiselforge {

namespace {

// Directive lines `// <name>` or `// <name>: <arg>`, in source order.
std::vector<std::pair<std::string, std::string>> directives(const std::string& src) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(src);
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find("// mock-");
    if (start == std::string::npos) continue;
    std::string rest = line.substr(start + 3);
    while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.pop_back();
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      out.emplace_back(rest, "");
    } else {
      std::string arg = rest.substr(colon + 1);
      arg.erase(0, arg.find_first_not_of(' '));
      out.emplace_back(rest.substr(0, colon), arg);
    }
  }
  return out;
}

}  // namespace

std::string completion_body(const std::string& text) {
  nlohmann::json j{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}}},
                   {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
  return j.dump();
}

ScriptedTransport::ScriptedTransport(nlohmann::json playlist) {
  if (playlist.is_array()) {
    lists_["default"] = std::move(playlist);
  } else if (playlist.is_object()) {
    for (auto& [role, list] : playlist.items()) {
      if (!list.is_array()) throw PreconditionError("playlist entry '" + role + "' is not an array");
      lists_[role] = list;
    }
  } else {
    throw PreconditionError("playlist must be a JSON array or object");
  }
  for (const auto& [role, list] : lists_) {
    if (list.empty()) throw PreconditionError("playlist '" + role + "' is empty");
  }
}

std::unique_ptr<ScriptedTransport> ScriptedTransport::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mock playlist " + path.string());
  return std::make_unique<ScriptedTransport>(nlohmann::json::parse(in));
}

TransportReply ScriptedTransport::post(const ProviderConfig&, const std::string&, const std::string& json_body) {
  auto body = nlohmann::json::parse(json_body);
  std::string role = "default";
  for (const auto& m : body["messages"]) {
    if (m["role"] == "system") {
      if (auto r = agent_role_of(m["content"].get<std::string>())) role = *r;
      break;
    }
  }
  std::lock_guard lock(mu_);
  requests_.push_back({role, body});
  const std::string key = lists_.count(role) ? role : "default";
  auto it = lists_.find(key);
  if (it == lists_.end()) return {500, "no scripted reply for role " + role};
  const int index = served_[role]++;
  const auto& list = it->second;
  const auto& entry = list[std::min<std::size_t>(static_cast<std::size_t>(index), list.size() - 1)];
  if (entry.is_string()) return {200, completion_body(entry.get<std::string>())};
  if (entry.is_object() && entry.contains("transport_error")) {
    return {0, entry["transport_error"].is_string() ? entry["transport_error"].get<std::string>() : "transport error"};
  }
  if (entry.is_object() && entry.contains("status")) {
    const auto& b = entry.value("body", nlohmann::json(""));
    return {entry["status"].get<int>(), b.is_string() ? b.get<std::string>() : b.dump()};
  }
  throw PreconditionError("unrecognised playlist element: " + entry.dump());
}

int ScriptedTransport::calls(const std::string& role) const {
  std::lock_guard lock(mu_);
  auto it = served_.find(role);
  return it == served_.end() ? 0 : it->second;
}

int ScriptedTransport::total_calls() const {
  std::lock_guard lock(mu_);
  return static_cast<int>(requests_.size());
}

std::vector<ScriptedTransport::Request> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

CompileResult MockCompiler::compile_candidate(const Candidate& candidate, const CaseSpec& spec, double) {
  CompileResult r;
  std::string log;
  std::string sim_lines;
  for (const auto& [name, arg] : directives(candidate.chisel_src)) {
    if (name == "mock-compile-timeout") {
      r.status = CompileStatus::Timeout;
      r.raw_log = "[mock] elaboration exceeded its deadline\n";
      return r;
    }
    if (name == "mock-compile") log += arg + "\n";
    if (name.rfind("mock-sim", 0) == 0) sim_lines += "// " + name + (arg.empty() ? "" : ": " + arg) + "\n";
  }
  if (!log.empty()) {
    r.status = CompileStatus::Failed;
    r.raw_log = log;
    r.entries = parse_diagnostics(log);
    return r;
  }
  r.status = CompileStatus::Ok;
  r.verilog_src = sim_lines + "module " + spec.module_name + "(input clock, input reset);\nendmodule\n";
  return r;
}

SimResult MockSimulator::simulate_candidate(const std::string& verilog_src, const CaseSpec& spec, double, long) {
  SimResult r;
  std::string log;
  for (const auto& [name, arg] : directives(verilog_src)) {
    if (name == "mock-sim-timeout") {
      r.status = SimStatus::Timeout;
      r.raw_log = "[mock] simulation exceeded its deadline\n";
      return r;
    }
    if (name == "mock-sim-build-error") {
      r.status = SimStatus::BuildError;
      r.raw_log = arg;
      return r;
    }
    if (name == "mock-sim") log += arg + "\n";
  }
  const auto declared = declared_modules(verilog_src);
  if (std::find(declared.begin(), declared.end(), spec.module_name) == declared.end()) {
    r.status = SimStatus::BuildError;
    r.raw_log = "DUT does not declare module " + spec.module_name;
    return r;
  }
  const auto scan = parse_mismatches(log);
  r.raw_log = log;
  r.total_count = scan.total_count;
  if (scan.failed_count > 0) {
    r.status = SimStatus::Fail;
    r.mismatches = scan.entries;
    r.failed_count = scan.failed_count;
  } else {
    r.status = SimStatus::Pass;
  }
  return r;
}

}  // namespace chiselforge
