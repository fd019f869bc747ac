#include "chiselforge/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace chiselforge {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& required_templates() {
  static const std::vector<std::string> names{
      "generator.system",  "generator.initial", "generator.revision", "generator.format_reminder",
      "reviewer.system",   "reviewer.user",     "inspector.system",   "inspector.user"};
  return names;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read prompt template " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string truncate_middle(const std::string& s, std::size_t max_chars) {
  static const std::string kMarker = "\n[... truncated ...]\n";
  if (s.size() <= max_chars) return s;
  if (max_chars <= kMarker.size()) return s.substr(0, max_chars);
  const std::size_t keep = max_chars - kMarker.size();
  const std::size_t head = keep * 2 / 3;
  return s.substr(0, head) + kMarker + s.substr(s.size() - (keep - head));
}

std::string location_text(const ErrorEntry& e) {
  if (!e.location) return "unknown location";
  std::string s = e.location->file + ":" + std::to_string(e.location->line);
  if (e.location->column) s += ":" + std::to_string(*e.location->column);
  return s;
}

std::string one_line(std::string s, std::size_t max_chars) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  if (s.size() > max_chars) s = s.substr(0, max_chars) + "...";
  return s;
}

std::string signatures_text(const Feedback& f) {
  std::string out;
  for (const auto& s : feedback_signatures(f)) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::string record_detail(const IterationRecord& r) {
  std::string out = "### Iteration " + std::to_string(r.candidate.iteration) + " (" +
                    std::string(to_string(r.verdict)) + ")\n";
  if (r.feedback) out += render_feedback(*r.feedback) + "\n";
  if (r.plan) out += "Revision plan applied after this iteration:\n" + render_plan(*r.plan) + "\n";
  return out;
}

std::string record_summary(const IterationRecord& r) {
  std::string out = "- Iteration " + std::to_string(r.candidate.iteration) + ": " +
                    std::string(to_string(r.verdict));
  if (r.feedback) out += "; errors: " + one_line(signatures_text(*r.feedback), 160);
  if (r.plan && !r.plan->items.empty()) out += "; tried: " + one_line(r.plan->items.front().solution, 120);
  return out + "\n";
}

std::vector<ChatMessage> fit_to_budget(std::vector<ChatMessage> messages, std::size_t budget) {
  const std::size_t total = total_chars(messages);
  if (total <= budget) return messages;
  std::size_t fixed = 0;
  for (std::size_t i = 0; i + 1 < messages.size(); ++i) fixed += messages[i].content.size();
  if (fixed >= budget) throw PreconditionError("context budget is smaller than the system prompt");
  messages.back().content = truncate_middle(messages.back().content, budget - fixed);
  return messages;
}

}  // namespace

PromptLibrary PromptLibrary::load(const fs::path& dir) {
  PromptLibrary lib;
  for (const auto& name : required_templates()) {
    lib.templates_[name] = rstrip(read_text(dir / (name + ".txt")));
  }
  lib.version_ = fs::exists(dir / "VERSION") ? rstrip(read_text(dir / "VERSION")) : "unversioned";
  return lib;
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = load(default_data_dir() / "prompts");
  return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw std::runtime_error("unknown prompt template " + name);
  return it->second;
}

std::string PromptLibrary::fill(const std::string& name, const std::map<std::string, std::string>& values) const {
  const std::string& t = get(name);
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = t.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = t.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(t, pos, open - pos);
    const std::string key = t.substr(open + 2, close - open - 2);
    auto it = values.find(key);
    if (it == values.end()) throw std::runtime_error("template " + name + " needs a value for " + key);
    out += it->second;
    pos = close + 2;
  }
  out.append(t, pos, std::string::npos);
  return out;
}

std::size_t total_chars(const std::vector<ChatMessage>& messages) {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.content.size();
  return n;
}

std::optional<std::string> agent_role_of(const std::string& system_prompt) {
  static const std::regex marker(R"(\[agent:([a-z_]+)\])");
  std::smatch m;
  if (std::regex_search(system_prompt, m, marker)) return m[1].str();
  return std::nullopt;
}

std::string render_feedback(const Feedback& feedback) {
  std::ostringstream out;
  if (feedback.is_syntax()) {
    const auto& s = feedback.syntax();
    out << "Compilation failed with " << s.entries.size() << " error(s):\n";
    int i = 1;
    for (const auto& e : s.entries) {
      out << i++ << ". ";
      if (e.catalog_class) out << "[" << *e.catalog_class << "] ";
      out << location_text(e) << ": " << e.message << "\n";
      if (e.suggestion) out << "   compiler suggestion: " << *e.suggestion << "\n";
    }
  } else {
    const auto& f = feedback.functional();
    out << "Simulation failed: " << f.failed_count << " of " << f.total_count
        << " functional points mismatched.\n";
    int i = 1;
    for (const auto& m : f.mismatches) {
      out << i++ << ". testpoint " << m.testpoint_id << ": inputs " << (m.stimulus.empty() ? "-" : m.stimulus)
          << "; expected " << m.expected << "; got " << m.actual;
      if (m.time) out << " (time " << *m.time << ")";
      out << "\n";
    }
    if (static_cast<int>(f.mismatches.size()) < f.failed_count) {
      out << "(" << f.failed_count - static_cast<int>(f.mismatches.size()) << " further mismatches not listed)\n";
    }
  }
  return rstrip(out.str());
}

std::string render_plan(const RevisionPlan& plan) {
  std::string out;
  int i = 1;
  for (const auto& item : plan.items) {
    out += "ITEM " + std::to_string(i++) + "\n";
    out += "LOCATION: " + item.location + "\n";
    out += "CAUSE: " + item.cause_analysis + "\n";
    out += "SOLUTION: " + item.solution + "\n";
  }
  return rstrip(out);
}

std::vector<ChatMessage> render_generator_prompt(const PromptLibrary& lib, const CaseSpec& spec,
                                                 const RevisionPlan* plan, const Candidate* prior,
                                                 const PromptLimits& limits) {
  if ((plan == nullptr) != (prior == nullptr)) {
    throw PreconditionError("generator prompt needs both plan and prior code, or neither");
  }
  std::vector<ChatMessage> messages{{ChatRole::System, lib.get("generator.system")}};
  if (!plan) {
    messages.push_back({ChatRole::User, lib.fill("generator.initial", {{"spec", spec.spec_text},
                                                                        {"module_name", spec.module_name}})});
  } else {
    messages.push_back({ChatRole::User, lib.fill("generator.revision", {{"spec", spec.spec_text},
                                                                         {"module_name", spec.module_name},
                                                                         {"code", rstrip(prior->chisel_src)},
                                                                         {"plan", render_plan(*plan)}})});
  }
  return fit_to_budget(std::move(messages), limits.context_budget_chars);
}

std::vector<ChatMessage> render_reviewer_prompt(const PromptLibrary& lib, const CaseSpec& spec,
                                                const Trace& trace, const Feedback& feedback,
                                                const std::vector<CatalogEntry>& catalog_hits,
                                                const std::optional<std::string>& escape_note,
                                                const PromptLimits& limits) {
  if (trace.records.empty()) throw PreconditionError("reviewer prompt needs a nonempty trace");
  feedback.validate();
  const auto& current = trace.records.back();

  std::string guidance;
  if (!catalog_hits.empty()) {
    guidance = "\n## Known error patterns\n";
    for (const auto& hit : catalog_hits) {
      guidance += "### " + hit.class_id + ": " + hit.description + "\n";
      guidance += "Cause: " + hit.cause + "\n";
      guidance += "Fix guidance: " + hit.fix_guidance + "\n";
      guidance += "Incorrect:\n" + hit.incorrect_snippet + "\nCorrected:\n" + hit.corrected_snippet + "\n";
    }
  }
  std::string note;
  if (escape_note) {
    note = "\n## Discarded approach\nEarlier attempts looped on this error without progress and were "
           "discarded. Do not repeat that approach:\n" +
           *escape_note + "\n";
  }

  // Earlier records, most recent first.
  std::vector<const IterationRecord*> history;
  for (auto it = trace.records.rbegin() + 1; it != trace.records.rend(); ++it) history.push_back(&*it);

  auto render_history = [&](int window, bool with_summaries) {
    if (history.empty()) return std::string();
    std::string h = "\n## Earlier iterations (most recent first)\n";
    const auto detailed = std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 0)), history.size());
    for (std::size_t i = 0; i < detailed; ++i) h += record_detail(*history[i]);
    if (with_summaries && detailed < history.size()) {
      h += "Older iterations:\n";
      for (std::size_t i = detailed; i < history.size(); ++i) h += record_summary(*history[i]);
    }
    return h;
  };

  auto build = [&](const std::string& history_text) {
    std::vector<ChatMessage> messages{{ChatRole::System, lib.get("reviewer.system")}};
    messages.push_back({ChatRole::User, lib.fill("reviewer.user", {{"spec", spec.spec_text},
                                                                    {"iteration", std::to_string(current.candidate.iteration)},
                                                                    {"code", rstrip(current.candidate.chisel_src)},
                                                                    {"errors", render_feedback(feedback)},
                                                                    {"guidance", guidance},
                                                                    {"escape_note", note},
                                                                    {"history", history_text}})});
    return messages;
  };

  for (bool summaries : {true, false}) {
    for (int w = limits.full_detail_window; w >= 0; --w) {
      auto messages = build(render_history(w, summaries));
      if (total_chars(messages) <= limits.context_budget_chars) return messages;
      if (!summaries && w == 0) break;
    }
  }
  return fit_to_budget(build(""), limits.context_budget_chars);
}

std::vector<int> loop_candidates(const Trace& trace, const Feedback& feedback, int current_iteration) {
  const auto current = feedback_signatures(feedback);
  const std::set<std::string> cur(current.begin(), current.end());
  std::vector<int> out;
  for (auto it = trace.records.rbegin(); it != trace.records.rend(); ++it) {
    if (it->candidate.iteration >= current_iteration || !it->feedback) continue;
    for (const auto& s : feedback_signatures(*it->feedback)) {
      if (cur.count(s)) {
        out.push_back(it->candidate.iteration);
        break;
      }
    }
  }
  return out;
}

std::vector<ChatMessage> render_inspector_prompt(const PromptLibrary& lib, const Trace& trace,
                                                 const Feedback& feedback, int current_iteration,
                                                 const PromptLimits& limits) {
  const auto candidates = loop_candidates(trace, feedback, current_iteration);
  const std::string current_text = render_feedback(feedback);
  const auto current_sigs = feedback_signatures(feedback);

  auto build = [&](std::size_t pair_count) {
    std::string pairs;
    for (std::size_t i = 0; i < pair_count; ++i) {
      const int j = candidates[i];
      const auto& rec = *std::find_if(trace.records.begin(), trace.records.end(),
                                      [&](const IterationRecord& r) { return r.candidate.iteration == j; });
      std::string shared;
      for (const auto& s : feedback_signatures(*rec.feedback)) {
        if (std::find(current_sigs.begin(), current_sigs.end(), s) != current_sigs.end()) {
          shared += (shared.empty() ? "" : ", ") + s;
        }
      }
      pairs += "## Comparison with iteration " + std::to_string(j) + "\n";
      pairs += "Shared error locations: " + shared + "\n";
      pairs += "Errors at iteration " + std::to_string(j) + ":\n" + render_feedback(*rec.feedback) + "\n";
      if (rec.plan) pairs += "Plan tried after iteration " + std::to_string(j) + ":\n" + render_plan(*rec.plan) + "\n";
      pairs += "Errors now (iteration " + std::to_string(current_iteration) + "):\n" + current_text + "\n\n";
    }
    std::vector<ChatMessage> messages{{ChatRole::System, lib.get("inspector.system")}};
    messages.push_back({ChatRole::User, lib.fill("inspector.user", {{"current_iteration", std::to_string(current_iteration)},
                                                                     {"pairs", pairs}})});
    return messages;
  };

  for (std::size_t n = candidates.size();; --n) {
    auto messages = build(n);
    if (total_chars(messages) <= limits.context_budget_chars || n <= 1) {
      return fit_to_budget(std::move(messages), limits.context_budget_chars);
    }
  }
}

std::string parse_code_response(const std::string& text) {
  // Fences are recognised only at the start of a line.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end) of block bodies
  std::size_t pos = 0;
  std::optional<std::size_t> open_body;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const std::size_t line_end = eol == std::string::npos ? text.size() : eol;
    const std::string_view line(text.data() + pos, line_end - pos);
    const auto first = line.find_first_not_of(" \t");
    const bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
    if (fence) {
      if (!open_body) {
        open_body = eol == std::string::npos ? text.size() : eol + 1;
      } else {
        // Body ends before the newline that precedes the closing fence.
        std::size_t end = pos;
        if (end > *open_body && text[end - 1] == '\n') --end;
        blocks.emplace_back(*open_body, std::max(end, *open_body));
        open_body.reset();
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  std::string body;
  if (!blocks.empty()) {
    body = text.substr(blocks.back().first, blocks.back().second - blocks.back().first);
  } else if (open_body) {
    body = text.substr(*open_body);  // reply cut off before the closing fence
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  } else {
    throw MalformedResponse("response contains no fenced code block");
  }
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw MalformedResponse("fenced code block is empty");
  }
  return body;
}

RevisionPlan parse_revision_plan(const std::string& text) {
  static const std::regex label(
      R"(^\s*(?:[-*>#]+\s*)?(?:\d+[.)]\s*)?\**\s*(location|cause(?:[ _]analysis)?|solution|fix)\s*\**\s*:\s*\**\s*(.*)$)",
      std::regex::ECMAScript | std::regex::icase);
  static const std::regex item_header(R"(^\s*(?:[#*>-]+\s*)?\**\s*(?:item|error)\s*#?\d+\b.*$)",
                                      std::regex::ECMAScript | std::regex::icase);

  RevisionPlan plan;
  plan.raw_response = text;
  struct Draft {
    std::string location, cause, solution;
    std::string* open = nullptr;
  } draft;

  auto flush = [&] {
    auto clean = [](std::string s) { return rstrip(std::move(s)); };
    PlanItem item{clean(draft.location), clean(draft.cause), clean(draft.solution)};
    if (!item.cause_analysis.empty() && !item.solution.empty()) {
      if (item.location.empty()) item.location = "unspecified";
      plan.items.push_back(std::move(item));
    }
    draft = Draft{};
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, label)) {
      std::string key = m[1].str();
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      std::string value = m[2].str();
      while (!value.empty() && value.back() == '*') value.pop_back();
      value = rstrip(value);
      std::string* field = key == "location"            ? &draft.location
                           : key.rfind("cause", 0) == 0 ? &draft.cause
                                                        : &draft.solution;
      if (!field->empty()) flush();  // a repeated label starts the next item
      field = key == "location" ? &draft.location : key.rfind("cause", 0) == 0 ? &draft.cause : &draft.solution;
      *field = value;
      draft.open = field;
      continue;
    }
    if (std::regex_match(line, item_header)) {
      flush();
      continue;
    }
    if (draft.open) {
      if (line.find_first_not_of(" \t") == std::string::npos) {
        draft.open = nullptr;
        continue;
      }
      if (!draft.open->empty()) *draft.open += "\n";
      *draft.open += rstrip(line);
    }
  }
  flush();
  if (plan.items.empty()) throw MalformedResponse("reviewer response contains no LOCATION/CAUSE/SOLUTION item");
  return plan;
}

LoopVerdict parse_inspector_verdict(const std::string& text) {
  static const std::regex is_loop(R"(is[_ ]?loop\**\s*[:=]\s*\**\s*(yes|no|true|false))",
                                  std::regex::ECMAScript | std::regex::icase);
  static const std::regex matched(R"(matched(?:[_ ]?(?:prior[_ ]?)?iteration)?\**\s*[:=]\s*\**\s*(\d+))",
                                  std::regex::ECMAScript | std::regex::icase);
  static const std::regex cause(R"(cause(?:[_ ]?summary)?\**\s*[:=]\s*\**\s*([^\n]*))",
                                std::regex::ECMAScript | std::regex::icase);

  LoopVerdict v;
  std::set<bool> answers;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), is_loop); it != std::sregex_iterator(); ++it) {
    std::string a = (*it)[1].str();
    std::transform(a.begin(), a.end(), a.begin(), [](unsigned char c) { return std::tolower(c); });
    answers.insert(a == "yes" || a == "true");
  }
  std::smatch m;
  if (std::regex_search(text, m, cause)) v.cause_summary = rstrip(m[1].str());
  if (answers.size() != 1 || !*answers.begin()) return v;

  std::set<int> indices;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), matched); it != std::sregex_iterator(); ++it) {
    indices.insert(std::stoi((*it)[1].str()));
  }
  if (indices.size() != 1) return v;
  v.is_loop = true;
  v.matched_prior_iteration = *indices.begin();
  return v;
}

}  // namespace chiselforge
