#include "chiselforge/diagnostics.hpp"

#include <deque>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

namespace chiselforge {

namespace {

constexpr auto kIcase = std::regex::ECMAScript | std::regex::icase;

const std::regex& re(const char* pattern, bool icase = false) {
  // Patterns are string literals, so the pointer is a stable cache key.
  thread_local std::deque<std::pair<const char*, std::regex>> cache;
  for (auto& [p, r] : cache) {
    if (p == pattern) return r;
  }
  cache.emplace_back(pattern, std::regex(pattern, icase ? kIcase : std::regex::ECMAScript));
  return cache.back().second;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Line {
  std::string text;  // tag and ANSI codes removed, right-trimmed
  std::string tag;   // sbt level tag such as "error" or "info", lowercased
};

std::vector<Line> split_lines(std::string_view log) {
  std::vector<Line> out;
  std::string cleaned = std::regex_replace(std::string(log), re(R"(\x1b\[[0-9;]*[A-Za-z])"), "");
  std::istringstream in(cleaned);
  std::string raw;
  while (std::getline(in, raw)) {
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t')) {
      raw.pop_back();
    }
    Line line;
    std::smatch m;
    if (std::regex_search(raw, m, re(R"(^\[(error|e|info|warn|warning|success|debug)\] ?)", true))) {
      line.tag = m[1].str();
      for (auto& c : line.tag) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      line.text = raw.substr(static_cast<std::size_t>(m.length(0)));
    } else {
      line.text = raw;
    }
    out.push_back(std::move(line));
  }
  return out;
}

bool is_noise(const Line& line) {
  if (line.tag == "info" || line.tag == "warn" || line.tag == "warning" ||
      line.tag == "success" || line.tag == "debug") {
    return true;
  }
  const std::string t = trim(line.text);
  if (t.empty()) return true;
  static const char* kNoise[] = {
      R"(^at\s+[\w.$<>/]+\()",
      R"(^\.\.\.\s*\d+\s+more)",
      R"(^\(?\s*\w+\s*/\s*\w+\s*\)?\s*compilation failed)",
      R"(^compilation failed)",
      R"(^(one|two|three|\d+) (errors?|warnings?) found)",
      R"(^total time:)",
      R"(^nonzero exit code)",
      R"(^stack trace is suppressed)",
      R"(^longer explanation available)",
      R"(^use 'last' for the full log)",
      R"(^(\d+ )?(errors?|warnings?) generated)",
  };
  for (const char* p : kNoise) {
    if (std::regex_search(t, re(p, true))) return true;
  }
  return false;
}

bool is_caret_line(const std::string& t) {
  return std::regex_match(t, re(R"(\s*\|?\s*\^[\^~\s]*)"));
}

struct Pending {
  std::optional<SourceLocation> location;
  std::vector<std::string> lines;
  bool expect_echo = false;   // scalac echoes the source line and a caret
  bool message_next = false;  // header carried no message text
};

std::string strip_locator(std::string msg, std::optional<SourceLocation>& loc) {
  std::smatch m;
  if (std::regex_search(msg, m, re(R"(@\[([^\]\s:]+)(?:\s+|:)(\d+):(\d+)\])"))) {
    if (!loc) loc = SourceLocation{m[1].str(), std::stoi(m[2].str()), std::stoi(m[3].str())};
    msg = m.prefix().str() + " " + m.suffix().str();
  }
  msg = std::regex_replace(msg, re(R"(^[\s:]+)"), "");
  msg = std::regex_replace(msg, re(R"(^\[module\s+[^\]]*\]\s*:?\s*)"), "");
  return trim(msg);
}

// A line that opens a new diagnostic.
std::optional<Pending> start_of(const Line& line, const ErrorCatalog& catalog) {
  const std::string& raw = line.text;
  const std::string t = trim(raw);
  std::smatch m;

  if (std::regex_search(t, m, re(R"(^--\s*(?:\[E\d+\]\s*)?[\w ]*Error:\s*(\S+?):(\d+):(\d+)\s*-*$)"))) {
    Pending p;
    p.location = SourceLocation{m[1].str(), std::stoi(m[2].str()), std::stoi(m[3].str())};
    p.message_next = true;
    return p;
  }
  if (std::regex_match(t, m, re(R"(([^\s:|][^\s:]*):(\d+):(?:(\d+):)?\s*(.*))"))) {
    std::string msg = m[4].str();
    if (std::regex_search(msg, re(R"(^(warning|note|info)\s*:)", true))) return std::nullopt;
    msg = std::regex_replace(msg, re(R"(^(?:fatal\s+)?error\s*:\s*)", true), "");
    Pending p;
    p.location = SourceLocation{m[1].str(), std::stoi(m[2].str()),
                                m[3].matched ? std::optional<int>(std::stoi(m[3].str())) : std::nullopt};
    if (msg.empty()) {
      p.message_next = true;
    } else {
      p.lines.push_back(trim(msg));
      p.expect_echo = true;
    }
    return p;
  }
  if (std::regex_match(
          t, m,
          re(R"((?:Exception in thread "[^"]*"\s+)?(?:Caused by:\s*)?((?:[A-Za-z_$][\w$]*\.)*[A-Za-z_$][\w$]*(?:Exception|Error))(?::\s*(.*))?)"))) {
    Pending p;
    std::string msg = m[2].matched ? m[2].str() : std::string();
    msg = strip_locator(msg, p.location);
    if (msg.empty()) msg = m[1].str();
    p.lines.push_back(msg);
    return p;
  }
  if (std::regex_match(t, m, re(R"((?:fatal\s+)?error\s*:\s*(.+))", true))) {
    Pending p;
    std::string msg = strip_locator(m[1].str(), p.location);
    if (msg.empty()) return std::nullopt;
    p.lines.push_back(msg);
    return p;
  }
  const bool indented = !raw.empty() && (raw.front() == ' ' || raw.front() == '\t');
  if (!indented || line.tag == "error" || line.tag == "e") {
    if (std::regex_search(t, re(R"(^(found\s*:|type mismatch))", true)) || catalog.match(t)) {
      Pending p;
      std::string msg = strip_locator(t, p.location);
      if (msg.empty()) return std::nullopt;
      p.lines.push_back(msg);
      return p;
    }
  }
  return std::nullopt;
}

// Text to fold into the open diagnostic, if the line continues it.
std::optional<std::string> continuation_of(const std::string& raw) {
  const std::string t = trim(raw);
  std::smatch m;
  if (std::regex_match(t, re(R"(\d+\s*\|.*)"))) return std::string();  // source echo
  if (std::regex_match(t, m, re(R"(\|\s?(.*))"))) {
    std::string body = trim(m[1].str());
    if (body.empty() || is_caret_line(body)) return std::string();
    return body;
  }
  if (std::regex_search(t, re(R"(^(found\s*:|required\s*:|did you mean|perhaps|sample path|\(min))", true))) {
    return t;
  }
  return std::nullopt;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

ErrorEntry finish(std::optional<SourceLocation> loc, std::string message, const ErrorCatalog& catalog) {
  ErrorEntry e;
  e.location = std::move(loc);
  e.message = std::move(message);
  std::smatch m;
  if (std::regex_search(e.message, m, re(R"(did you mean\s+`?([^?\s`]+)`?\s*\?)", true))) {
    e.suggestion = m[1].str();
  }
  if (const auto* hit = catalog.match(e.message)) e.catalog_class = hit->class_id;
  const bool static_check =
      (e.catalog_class && (*e.catalog_class == "B3" || *e.catalog_class == "C2")) ||
      std::regex_search(e.message, re(R"(not fully initialized|combinational (cycle|loop))", true));
  e.kind = static_check ? ErrorKind::FunctionalStatic : ErrorKind::Syntax;
  e.location_signature = location_signature(e);
  return e;
}

}  // namespace

std::vector<ErrorEntry> parse_diagnostics(std::string_view raw_log, const ErrorCatalog& catalog) {
  const auto lines = split_lines(raw_log);
  std::vector<ErrorEntry> out;
  std::set<std::pair<std::string, std::string>> seen;

  auto emit = [&](Pending& p) {
    const std::string msg = join_lines(p.lines);
    if (msg.empty()) return;
    std::string key_loc;
    if (p.location) {
      key_loc = p.location->file + ":" + std::to_string(p.location->line) + ":" +
                (p.location->column ? std::to_string(*p.location->column) : "");
    }
    if (!seen.insert({key_loc, msg}).second) return;
    out.push_back(finish(p.location, msg, catalog));
  };

  std::optional<Pending> open;
  for (const auto& line : lines) {
    if (is_noise(line)) {
      if (open && !open->message_next) {
        emit(*open);
        open.reset();
      }
      continue;
    }
    if (open) {
      if (open->message_next) {
        if (auto cont = continuation_of(line.text)) {
          if (!cont->empty()) {
            open->lines.push_back(*cont);
            open->message_next = false;
            open->expect_echo = false;
          }
          continue;
        }
        if (!start_of(line, catalog)) {
          open->lines.push_back(trim(line.text));
          open->message_next = false;
          open->expect_echo = true;
          continue;
        }
      } else if (auto cont = continuation_of(line.text)) {
        if (!cont->empty()) open->lines.push_back(*cont);
        continue;
      }
      if (is_caret_line(trim(line.text))) {
        emit(*open);
        open.reset();
        continue;
      }
    }
    if (auto started = start_of(line, catalog)) {
      if (open) emit(*open);
      open = std::move(started);
      continue;
    }
    if (open && open->expect_echo) continue;  // echoed source line before the caret
    if (open) {
      emit(*open);
      open.reset();
    }
  }
  if (open) emit(*open);

  if (out.empty()) {
    std::vector<std::string> head;
    std::size_t chars = 0;
    for (const auto& line : lines) {
      const std::string t = trim(line.text);
      if (t.empty() || is_caret_line(t) || continuation_of(t)) continue;
      head.push_back(t);
      chars += t.size();
      if (head.size() >= 5 || chars >= 400) break;
    }
    if (!head.empty()) out.push_back(finish(std::nullopt, join_lines(head), catalog));
  }
  return out;
}

std::string render_diagnostics(const std::vector<ErrorEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    std::istringstream in(e.message);
    std::string first;
    std::getline(in, first);
    if (e.location && !e.location->file.empty()) {
      out += e.location->file + ":" + std::to_string(e.location->line) + ":";
      if (e.location->column) out += std::to_string(*e.location->column) + ":";
      out += " " + first + "\n";
    } else {
      out += "error: " + first + "\n";
    }
    std::string rest;
    while (std::getline(in, rest)) out += "  | " + rest + "\n";
  }
  return out;
}

}  // namespace chiselforge
