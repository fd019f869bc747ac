#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chiselforge {

/// Thrown when a caller violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One benchmark problem.
struct CaseSpec {
  std::string case_id;
  std::string spec_text;
  std::string testbench_src;
  std::optional<std::string> reference_src;
  std::string module_name;
  std::string origin;
  std::optional<std::string> excluded;
  std::optional<long> seed;

  bool operator==(const CaseSpec&) const = default;
};

enum class Provenance { InitialGeneration, Revision, PostEscapeRevision };

struct Candidate {
  int iteration = 0;
  std::string chisel_src;
  std::optional<std::string> verilog_src;  // present iff compilation succeeded
  Provenance provenance = Provenance::InitialGeneration;

  bool operator==(const Candidate&) const = default;
};

enum class ErrorKind { Syntax, FunctionalStatic };

struct SourceLocation {
  std::string file;
  int line = 0;
  std::optional<int> column;

  bool operator==(const SourceLocation&) const = default;
};

struct ErrorEntry {
  ErrorKind kind = ErrorKind::Syntax;
  std::optional<SourceLocation> location;  // absent = unknown
  std::string message;
  std::optional<std::string> suggestion;
  std::optional<std::string> catalog_class;
  std::string location_signature;

  bool operator==(const ErrorEntry&) const = default;
};

struct MismatchEntry {
  std::string testpoint_id;
  std::string stimulus;
  std::string expected;
  std::string actual;
  std::optional<double> time;

  bool operator==(const MismatchEntry&) const = default;
};

struct SyntaxFeedback {
  std::vector<ErrorEntry> entries;
  std::string raw_log;

  bool operator==(const SyntaxFeedback&) const = default;
};

struct FunctionalFeedback {
  std::vector<MismatchEntry> mismatches;
  int failed_count = 0;
  int total_count = 0;
  std::string raw_log;

  bool operator==(const FunctionalFeedback&) const = default;
};

/// Structured error list from either compilation or simulation.
struct Feedback {
  std::variant<SyntaxFeedback, FunctionalFeedback> variant;

  bool is_syntax() const { return std::holds_alternative<SyntaxFeedback>(variant); }
  const SyntaxFeedback& syntax() const { return std::get<SyntaxFeedback>(variant); }
  const FunctionalFeedback& functional() const {
    return std::get<FunctionalFeedback>(variant);
  }

  /// Validates the variant invariants; throws PreconditionError.
  void validate() const;

  bool operator==(const Feedback&) const = default;
};

struct PlanItem {
  std::string location;
  std::string cause_analysis;
  std::string solution;

  bool operator==(const PlanItem&) const = default;
};

struct RevisionPlan {
  std::vector<PlanItem> items;
  std::string raw_response;

  bool operator==(const RevisionPlan&) const = default;
};

enum class Verdict {
  Success,
  SyntaxError,
  FunctionalError,
  ToolTimeout,
  ProviderError,
  Exhausted
};

struct IterationRecord {
  Candidate candidate;
  std::optional<Feedback> feedback;  // absent = success
  std::optional<RevisionPlan> plan;
  Verdict verdict = Verdict::Success;

  bool operator==(const IterationRecord&) const = default;
};

/// One escape event: records (span_start, span_end] removed from the trace.
struct Erasure {
  int span_start = 0;
  int span_end = 0;
  std::vector<IterationRecord> erased_records;
  std::string cause_summary;
  std::optional<RevisionPlan> superseded_plan;

  bool operator==(const Erasure&) const = default;
};

/// Ordered iteration history of one trial. Value type; every mutating
/// operation returns a new Trace.
struct Trace {
  std::vector<IterationRecord> records;
  std::vector<Erasure> erasures;

  /// Index the next appended record must carry.
  int next_iteration() const;

  bool operator==(const Trace&) const = default;
};

struct Sampling {
  bool provider_default = true;
  double temperature = 1.0;
  double top_p = 1.0;

  bool operator==(const Sampling&) const = default;
};

struct RunConfig {
  int max_iterations = 10;
  int trials = 10;
  std::vector<int> k_values{1, 5, 10};
  std::string model_id;
  Sampling sampling;
  double compile_timeout_s = 300;
  double sim_timeout_s = 120;
  double llm_timeout_s = 120;
  int parallelism = 1;
  bool escape_enabled = true;
  long seed = 0;

  /// Throws PreconditionError when an invariant does not hold.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

std::string_view to_string(Verdict v);
std::string_view to_string(ErrorKind k);
std::string_view to_string(Provenance p);
Verdict verdict_from_string(std::string_view s);
ErrorKind error_kind_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);

/// Success iff both steps pass. sim_ok must be absent exactly when
/// compilation failed, since simulation never runs on a failed compile.
Verdict classify_verdict(bool compile_ok, std::optional<bool> sim_ok);

/// The identifier, method or type a diagnostic message names, if any.
std::optional<std::string> named_construct(std::string_view message);

/// First line of a message, lowercased, with numerals replaced by '#'.
std::string normalized_message_head(std::string_view message);

/// Line-independent identity of a diagnostic, used to recognise the same
/// error across revisions whose line numbers shift.
std::string location_signature(const ErrorEntry& entry);

/// The set of signatures a feedback carries. Functional mismatches are
/// keyed by their testpoint.
std::vector<std::string> feedback_signatures(const Feedback& feedback);

/// Returns a copy of `trace` with `record` appended. The record's iteration
/// must equal trace.next_iteration().
Trace append_record(const Trace& trace, IterationRecord record);

}  // namespace chiselforge
