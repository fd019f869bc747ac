#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chiselforge/catalog.hpp"
#include "chiselforge/compile_adapter.hpp"
#include "chiselforge/domain.hpp"
#include "chiselforge/llm_gateway.hpp"
#include "chiselforge/prompts.hpp"
#include "chiselforge/sim_adapter.hpp"
#include "json.hpp"

namespace chiselforge {

struct LlmCallCounts {
  int generator = 0;
  int reviewer = 0;
  int inspector = 0;

  bool operator==(const LlmCallCounts&) const = default;
};

struct PhaseTiming {
  double generate_s = 0;
  double compile_s = 0;
  double simulate_s = 0;
  double review_s = 0;
  double inspect_s = 0;

  bool operator==(const PhaseTiming&) const = default;
};

/// Result of one trial of one case.
struct CaseOutcome {
  std::string case_id;
  int trial = 0;
  Verdict final_verdict = Verdict::Exhausted;
  int iterations_used = 0;
  Trace trace;
  int escapes_triggered = 0;
  LlmCallCounts llm_calls;
  PhaseTiming timing;
  Usage usage;
  /// Verdict of every attempt in order, erased ones included.
  std::vector<Verdict> attempt_verdicts;
  /// For Exhausted outcomes, the verdict of the last attempt.
  std::optional<Verdict> last_error_kind;
  /// Infrastructure failure text for ToolTimeout / ProviderError.
  std::string error_message;

  bool operator==(const CaseOutcome&) const;
};

/// Non-progress loop: records (start_iteration, end_iteration] repeat the
/// error seen at start_iteration.
struct LoopSpan {
  int start_iteration = 0;
  int end_iteration = 0;
  std::string matched_signature;
  std::string cause_summary;

  bool operator==(const LoopSpan&) const = default;
};

inline constexpr int kEventSchemaVersion = 1;

/// One step of a run. `type` is one of iteration_started, generated,
/// compiled, simulated, reviewed, escaped, finished.
struct EngineEvent {
  std::string type;
  std::string case_id;
  int trial = 0;
  int attempt = 0;
  int iteration = 0;
  nlohmann::json detail = nlohmann::json::object();

  nlohmann::json to_json() const;
};

using EventSink = std::function<void(const EngineEvent&)>;
/// Monotone seconds; injectable so mock runs are reproducible.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

/// Chat access shared by the three agent roles.
struct Gateway {
  ProviderConfig provider;
  ChatTransport* transport = nullptr;
  Sleeper sleeper = real_sleeper();
};

struct EngineDeps {
  Gateway gateway;
  CompileAdapter* compiler = nullptr;
  SimAdapter* simulator = nullptr;
  const ErrorCatalog* catalog = &ErrorCatalog::builtin();
  const PromptLibrary* prompts = &PromptLibrary::builtin();
  PromptLimits limits;
  EventSink events;
  Clock clock = steady_clock_seconds();
};

/// Syntax feedback for a failed compile, functional feedback for a compiled
/// candidate whose simulation failed. A simulation build error becomes
/// functional feedback carrying one "interface" mismatch.
Feedback build_feedback(const CompileResult& compile_result, const std::optional<SimResult>& sim_result);

/// Mechanical signature prefilter, then an Inspector verdict. Returns the
/// span for the most recent prior record the Inspector confirms. Provider
/// failures and ambiguous verdicts give no span. `current_iteration` is the
/// index of the record holding `current_feedback`.
std::optional<LoopSpan> detect_loop(const Trace& trace, const Feedback& current_feedback, int current_iteration,
                                    const EngineDeps& deps, LlmCallCounts* calls = nullptr,
                                    Usage* usage = nullptr);

/// Moves records (start, end] into a new erasure. The plan the surviving
/// tail record carried is kept in the erasure and cleared on the record.
Trace erase_loop(const Trace& trace, const LoopSpan& span);

/// Runs the generate, compile, simulate, review, revise loop for one trial.
CaseOutcome run_case(const CaseSpec& spec, const RunConfig& cfg, const EngineDeps& deps, int trial = 0);

}  // namespace chiselforge
