#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chiselforge/catalog.hpp"
#include "chiselforge/domain.hpp"
#include "chiselforge/llm_gateway.hpp"

namespace chiselforge {

/// Role prompt templates loaded from a directory of `<name>.txt` files.
/// Placeholders are written `{{name}}`.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir);
  static const PromptLibrary& builtin();

  const std::string& version() const { return version_; }
  const std::string& get(const std::string& name) const;
  std::string fill(const std::string& name, const std::map<std::string, std::string>& values) const;

 private:
  std::string version_;
  std::map<std::string, std::string> templates_;
};

struct PromptLimits {
  /// Most recent iterations rendered in full; older ones get one line.
  int full_detail_window = 4;
  /// Upper bound on the summed length of all message contents.
  std::size_t context_budget_chars = 64000;
};

std::string render_feedback(const Feedback& feedback);
std::string render_plan(const RevisionPlan& plan);

/// Zero-shot form when plan and prior are both null, revision form when
/// both are given.
std::vector<ChatMessage> render_generator_prompt(const PromptLibrary& lib, const CaseSpec& spec,
                                                 const RevisionPlan* plan, const Candidate* prior,
                                                 const PromptLimits& limits = {});

/// The trace's last record is the current candidate; earlier records form
/// the history window.
std::vector<ChatMessage> render_reviewer_prompt(const PromptLibrary& lib, const CaseSpec& spec,
                                                const Trace& trace, const Feedback& feedback,
                                                const std::vector<CatalogEntry>& catalog_hits,
                                                const std::optional<std::string>& escape_note = std::nullopt,
                                                const PromptLimits& limits = {});

/// Iterations before `current_iteration` whose feedback shares a location
/// signature with `feedback`, most recent first.
std::vector<int> loop_candidates(const Trace& trace, const Feedback& feedback, int current_iteration);

std::vector<ChatMessage> render_inspector_prompt(const PromptLibrary& lib, const Trace& trace,
                                                 const Feedback& feedback, int current_iteration,
                                                 const PromptLimits& limits = {});

std::size_t total_chars(const std::vector<ChatMessage>& messages);

/// The agent role named by a system prompt's `[agent:<role>]` marker.
std::optional<std::string> agent_role_of(const std::string& system_prompt);

struct LoopVerdict {
  bool is_loop = false;
  std::optional<int> matched_prior_iteration;  // present iff is_loop
  std::string cause_summary;

  bool operator==(const LoopVerdict&) const = default;
};

/// Body of the last fenced code block. Throws MalformedResponse.
std::string parse_code_response(const std::string& text);

/// LOCATION / CAUSE / SOLUTION items. Throws MalformedResponse when no
/// complete item is found.
RevisionPlan parse_revision_plan(const std::string& text);

/// Any ambiguity yields is_loop = false.
LoopVerdict parse_inspector_verdict(const std::string& text);

}  // namespace chiselforge
