#pragma once
// Hermetic stand-ins for the provider and both toolchains.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "chiselforge/compile_adapter.hpp"
#include "chiselforge/llm_gateway.hpp"
#include "chiselforge/sim_adapter.hpp"

namespace chiselforge {

/// Replays canned provider replies. A playlist is either a flat JSON array
/// or an object with per-role arrays ("generator", "reviewer", "inspector",
/// optional "default"). Each element is a string (HTTP 200 carrying that
/// assistant text), {"status": N, "body": "..."} or {"transport_error": "..."}.
/// When a list runs out its last element repeats.
class ScriptedTransport : public ChatTransport {
 public:
  struct Request {
    std::string role;  // from the system prompt's [agent:x] marker
    nlohmann::json body;
  };

  explicit ScriptedTransport(nlohmann::json playlist);
  static std::unique_ptr<ScriptedTransport> from_file(const std::filesystem::path& path);

  TransportReply post(const ProviderConfig& cfg, const std::string& api_key,
                      const std::string& json_body) override;

  int calls(const std::string& role) const;
  int total_calls() const;
  std::vector<Request> requests() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> lists_;
  std::map<std::string, int> served_;
  std::vector<Request> requests_;
};

/// Wraps assistant text in a chat-completions response body.
std::string completion_body(const std::string& text);

/// Compiles by directive. `// mock-compile: <diagnostic line>` makes the
/// compile fail with that line in the log; `// mock-compile-timeout` times
/// out. Otherwise emits a Verilog module named after the case and copies
/// every `// mock-sim...` line into it.
class MockCompiler : public CompileAdapter {
 public:
  CompileResult compile_candidate(const Candidate& candidate, const CaseSpec& spec,
                                  double timeout_s) override;
};

/// Simulates by directive found in the Verilog. `// mock-sim: <log line>`
/// contributes a log line (e.g. a CHECK ... FAIL line), `// mock-sim-timeout`
/// times out, `// mock-sim-build-error: <msg>` reports an interface error.
class MockSimulator : public SimAdapter {
 public:
  SimResult simulate_candidate(const std::string& verilog_src, const CaseSpec& spec, double timeout_s,
                               long seed) override;
};

}  // namespace chiselforge
