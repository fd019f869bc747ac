#include "chiselforge/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <set>

namespace chiselforge {

namespace {

constexpr std::array<std::pair<Verdict, std::string_view>, 6> kVerdictNames{{
    {Verdict::Success, "success"},
    {Verdict::SyntaxError, "syntax_error"},
    {Verdict::FunctionalError, "functional_error"},
    {Verdict::ToolTimeout, "tool_timeout"},
    {Verdict::ProviderError, "provider_error"},
    {Verdict::Exhausted, "exhausted"},
}};

constexpr std::array<std::pair<Provenance, std::string_view>, 3> kProvenanceNames{{
    {Provenance::InitialGeneration, "initial-generation"},
    {Provenance::Revision, "revision"},
    {Provenance::PostEscapeRevision, "post-escape-revision"},
}};

template <typename Enum, std::size_t N>
Enum parse_enum(const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view s, const char* what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw PreconditionError(std::string("unknown ") + what + ": " + std::string(s));
}

template <typename Enum, std::size_t N>
std::string_view enum_name(const std::array<std::pair<Enum, std::string_view>, N>& table,
                           Enum value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

struct ConstructRule {
  std::regex pattern;
  // Capture groups joined with '>' form the construct.
  std::vector<int> groups;
};

const std::vector<ConstructRule>& construct_rules() {
  static const std::vector<ConstructRule> rules = [] {
    const auto icase = std::regex::ECMAScript | std::regex::icase;
    std::vector<ConstructRule> r;
    r.push_back({std::regex(R"(value\s+([\w$]+)\s+is not a member(?:\s+of\s+([\w.$]+))?)", icase), {1, 2}});
    r.push_back({std::regex(R"(not found:\s*(?:value|type|object)\s+([\w$]+))", icase), {1}});
    r.push_back({std::regex(R"(reference\s+([\w.$\[\]]+)\s+(?:is\s+)?not fully initialized)", icase), {1}});
    r.push_back({std::regex(R"(class\s+([\w.$]+)\s+cannot be cast to class\s+([\w.$]+))", icase), {1, 2}});
    r.push_back({std::regex(R"(for method\s+([\w$]+))", icase), {1}});
    r.push_back({std::regex(R"(port\s+([\w$]+)\s+with abstract reset)", icase), {1}});
    r.push_back({std::regex(R"(([\w.$]+)\s+must be hardware)", icase), {1}});
    r.push_back({std::regex(R"(sink\s*\([^)]*?([\w$]+)\s*\)\s*and source\s*\([^)]*?([\w$]+)\s*\))", icase), {1, 2}});
    r.push_back({std::regex(R"(found\s*:\s*([\w.$\[\]]+)[\s\S]*?required\s*:\s*([\w.$\[\]]+))", icase), {1, 2}});
    r.push_back({std::regex(R"(sample path:\s*\{?\s*([\w$]+))", icase), {1}});
    r.push_back({std::regex(R"(no implicit\s+(clock|reset))", icase), {1}});
    r.push_back({std::regex(R"(`([^`]+)`)"), {1}});
    r.push_back({std::regex(R"('([^'\s]+)')"), {1}});
    return r;
  }();
  return rules;
}

}  // namespace

void Feedback::validate() const {
  if (is_syntax()) {
    const auto& s = syntax();
    if (s.entries.empty()) throw PreconditionError("syntax feedback needs at least one entry");
    for (const auto& e : s.entries) {
      if (e.message.empty()) throw PreconditionError("error entry with empty message");
    }
  } else {
    const auto& f = functional();
    if (f.failed_count < 1 || f.failed_count > f.total_count) {
      throw PreconditionError("functional feedback needs 1 <= failed_count <= total_count");
    }
  }
}

int Trace::next_iteration() const {
  return records.empty() ? 0 : records.back().candidate.iteration + 1;
}

void RunConfig::validate() const {
  if (max_iterations < 0) throw PreconditionError("max_iterations must be >= 0");
  if (trials < 1) throw PreconditionError("trials must be >= 1");
  for (int k : k_values) {
    if (k < 1 || k > trials) {
      throw PreconditionError("k=" + std::to_string(k) + " outside 1.." + std::to_string(trials));
    }
  }
  if (compile_timeout_s <= 0 || sim_timeout_s <= 0 || llm_timeout_s <= 0) {
    throw PreconditionError("timeouts must be positive");
  }
  if (parallelism < 1) throw PreconditionError("parallelism must be >= 1");
}

std::string_view to_string(Verdict v) { return enum_name(kVerdictNames, v); }
std::string_view to_string(Provenance p) { return enum_name(kProvenanceNames, p); }
std::string_view to_string(ErrorKind k) {
  return k == ErrorKind::Syntax ? "syntax" : "functional-static";
}

Verdict verdict_from_string(std::string_view s) { return parse_enum(kVerdictNames, s, "verdict"); }
Provenance provenance_from_string(std::string_view s) {
  return parse_enum(kProvenanceNames, s, "provenance");
}
ErrorKind error_kind_from_string(std::string_view s) {
  if (s == "syntax") return ErrorKind::Syntax;
  if (s == "functional-static") return ErrorKind::FunctionalStatic;
  throw PreconditionError("unknown error kind: " + std::string(s));
}

Verdict classify_verdict(bool compile_ok, std::optional<bool> sim_ok) {
  if (compile_ok != sim_ok.has_value()) {
    throw PreconditionError("simulation result must be present exactly when compilation succeeded");
  }
  if (!compile_ok) return Verdict::SyntaxError;
  return *sim_ok ? Verdict::Success : Verdict::FunctionalError;
}

std::optional<std::string> named_construct(std::string_view message) {
  const std::string text(message);
  for (const auto& rule : construct_rules()) {
    std::smatch m;
    if (!std::regex_search(text, m, rule.pattern)) continue;
    std::string out;
    for (int g : rule.groups) {
      if (!m[g].matched) continue;
      std::string part = m[g].str();
      while (!part.empty() && part.back() == '.') part.pop_back();
      if (part.empty()) continue;
      if (!out.empty()) out += '>';
      out += part;
    }
    if (!out.empty()) return out;
  }
  return std::nullopt;
}

std::string normalized_message_head(std::string_view message) {
  auto end = message.find('\n');
  std::string_view head = message.substr(0, end);
  std::string out;
  bool in_space = false;
  bool in_digits = false;
  for (char ch : head) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isdigit(c)) {
      if (!in_digits) out += '#';
      in_digits = true;
      in_space = false;
      continue;
    }
    in_digits = false;
    if (std::isspace(c)) {
      if (!in_space && !out.empty()) out += ' ';
      in_space = true;
      continue;
    }
    in_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '.')) out.pop_back();
  constexpr std::size_t kMaxHead = 96;
  if (out.size() > kMaxHead) out.resize(kMaxHead);
  return out;
}

std::string location_signature(const ErrorEntry& entry) {
  std::string sig = entry.catalog_class.value_or("-");
  sig += ':';
  sig += named_construct(entry.message).value_or("-");
  sig += ':';
  sig += normalized_message_head(entry.message);
  return sig;
}

std::vector<std::string> feedback_signatures(const Feedback& feedback) {
  std::set<std::string> sigs;
  if (feedback.is_syntax()) {
    for (const auto& e : feedback.syntax().entries) {
      sigs.insert(e.location_signature.empty() ? location_signature(e) : e.location_signature);
    }
  } else {
    for (const auto& m : feedback.functional().mismatches) {
      sigs.insert("F:" + m.testpoint_id);
    }
    if (feedback.functional().mismatches.empty()) sigs.insert("F:*");
  }
  return {sigs.begin(), sigs.end()};
}

Trace append_record(const Trace& trace, IterationRecord record) {
  const int expected = trace.next_iteration();
  if (record.candidate.iteration != expected) {
    throw PreconditionError("record iteration " + std::to_string(record.candidate.iteration) +
                            " does not follow trace (expected " + std::to_string(expected) + ")");
  }
  if ((record.verdict == Verdict::Success) != !record.feedback.has_value()) {
    throw PreconditionError("verdict Success must coincide with absent feedback");
  }
  if (record.candidate.iteration == 0 &&
      record.candidate.provenance != Provenance::InitialGeneration) {
    throw PreconditionError("iteration 0 must be the initial generation");
  }
  Trace out = trace;
  out.records.push_back(std::move(record));
  return out;
}

}  // namespace chiselforge
