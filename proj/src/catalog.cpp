#include "chiselforge/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#ifndef CHISELFORGE_DATA_DIR
#define CHISELFORGE_DATA_DIR "data"
#endif

namespace chiselforge {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string required_string(const nlohmann::json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw CatalogError(where + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

const std::vector<std::string>& ErrorCatalog::class_order() {
  static const std::vector<std::string> order{"A1", "A2", "A3", "B1", "B2", "B3",
                                              "B4", "B5", "B6", "B7", "C1", "C2"};
  return order;
}

ErrorCatalog ErrorCatalog::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CatalogError(std::string("catalog is not valid JSON: ") + e.what());
  }
  const nlohmann::json* records = &doc;
  if (doc.is_object()) {
    if (!doc.contains("entries")) throw CatalogError("catalog object lacks 'entries'");
    records = &doc.at("entries");
  }
  if (!records->is_array()) throw CatalogError("catalog entries must be a list");

  const auto& order = class_order();
  std::set<std::string> seen;
  std::vector<CatalogEntry> entries;
  for (const auto& rec : *records) {
    if (!rec.is_object()) throw CatalogError("catalog record must be an object");
    CatalogEntry e;
    e.class_id = required_string(rec, "class_id", "catalog record");
    const std::string where = "catalog entry " + e.class_id;
    if (std::find(order.begin(), order.end(), e.class_id) == order.end()) {
      throw CatalogError(where + ": unknown class id");
    }
    if (!seen.insert(e.class_id).second) throw CatalogError(where + ": duplicate class id");
    e.description = required_string(rec, "description", where);
    e.incorrect_snippet = required_string(rec, "incorrect_snippet", where);
    e.corrected_snippet = required_string(rec, "corrected_snippet", where);
    e.cause = required_string(rec, "cause", where);
    e.fix_guidance = required_string(rec, "fix_guidance", where);
    auto pats = rec.find("signature_patterns");
    if (pats == rec.end() || !pats->is_array() || pats->empty()) {
      throw CatalogError(where + ": needs at least one signature pattern");
    }
    for (const auto& p : *pats) {
      CatalogPattern pattern;
      if (p.is_object() && p.contains("contains") && p.at("contains").is_string()) {
        pattern.type = CatalogPattern::Type::Contains;
        pattern.text = p.at("contains").get<std::string>();
      } else if (p.is_object() && p.contains("regex") && p.at("regex").is_string()) {
        pattern.type = CatalogPattern::Type::Regex;
        pattern.text = p.at("regex").get<std::string>();
      } else {
        throw CatalogError(where + ": pattern must be {\"contains\": ...} or {\"regex\": ...}");
      }
      if (pattern.text.empty()) throw CatalogError(where + ": empty pattern");
      e.signature_patterns.push_back(std::move(pattern));
    }
    entries.push_back(std::move(e));
  }

  std::sort(entries.begin(), entries.end(), [&](const CatalogEntry& a, const CatalogEntry& b) {
    return std::find(order.begin(), order.end(), a.class_id) <
           std::find(order.begin(), order.end(), b.class_id);
  });

  ErrorCatalog catalog;
  for (const auto& e : entries) {
    Compiled c;
    for (const auto& p : e.signature_patterns) {
      if (p.type == CatalogPattern::Type::Contains) {
        c.needles.push_back(lower(p.text));
        continue;
      }
      try {
        c.regexes.emplace_back(p.text, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& err) {
        throw CatalogError("catalog entry " + e.class_id + ": pattern '" + p.text +
                           "' does not compile: " + err.what());
      }
    }
    catalog.compiled_.push_back(std::move(c));
  }
  catalog.entries_ = std::move(entries);
  return catalog;
}

ErrorCatalog ErrorCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const ErrorCatalog& ErrorCatalog::builtin() {
  static const ErrorCatalog catalog = load(default_data_dir() / "catalog.json");
  return catalog;
}

const CatalogEntry* ErrorCatalog::match(std::string_view message) const {
  if (message.empty()) return nullptr;
  const std::string lowered = lower(message);
  const std::string text(message);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& c = compiled_[i];
    for (const auto& needle : c.needles) {
      if (lowered.find(needle) != std::string::npos) return &entries_[i];
    }
    for (const auto& re : c.regexes) {
      if (std::regex_search(text, re)) return &entries_[i];
    }
  }
  return nullptr;
}

std::optional<CatalogEntry> ErrorCatalog::match_catalog(const ErrorEntry& entry) const {
  if (entry.message.empty()) throw PreconditionError("match_catalog needs a message");
  if (const auto* hit = match(entry.message)) return *hit;
  return std::nullopt;
}

std::vector<CatalogEntry> ErrorCatalog::guidance_for(const std::vector<ErrorEntry>& entries) const {
  std::set<std::size_t> hits;
  for (const auto& e : entries) {
    const CatalogEntry* hit = nullptr;
    if (e.catalog_class) hit = find(*e.catalog_class);
    if (!hit && !e.message.empty()) hit = match(e.message);
    if (hit) hits.insert(static_cast<std::size_t>(hit - entries_.data()));
  }
  std::vector<CatalogEntry> out;
  for (auto i : hits) out.push_back(entries_[i]);
  return out;
}

const CatalogEntry* ErrorCatalog::find(std::string_view class_id) const {
  for (const auto& e : entries_) {
    if (e.class_id == class_id) return &e;
  }
  return nullptr;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CHISELFORGE_DATA_DIR"); env && *env) return env;
  return CHISELFORGE_DATA_DIR;
}

}  // namespace chiselforge
