#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "chiselforge/domain.hpp"

namespace chiselforge {

/// A match pattern over compiler messages. `contains` is a case-insensitive
/// substring test; `regex` is a case-insensitive ECMAScript search.
struct CatalogPattern {
  enum class Type { Contains, Regex } type = Type::Contains;
  std::string text;
};

struct CatalogEntry {
  std::string class_id;
  std::string description;
  std::string incorrect_snippet;
  std::string corrected_snippet;
  std::vector<CatalogPattern> signature_patterns;
  std::string cause;
  std::string fix_guidance;
};

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Known LLM-generated Chisel error classes. Immutable once loaded.
class ErrorCatalog {
 public:
  /// The twelve class ids in match order.
  static const std::vector<std::string>& class_order();

  /// Parses and validates catalog records. Throws CatalogError.
  static ErrorCatalog from_json_text(const std::string& text);
  static ErrorCatalog load(const std::filesystem::path& path);
  /// Catalog shipped in the data directory.
  static const ErrorCatalog& builtin();

  /// First entry (in class order) whose pattern matches the message.
  const CatalogEntry* match(std::string_view message) const;
  std::optional<CatalogEntry> match_catalog(const ErrorEntry& entry) const;

  /// Deduplicated entries for every matched class, ordered by class id.
  std::vector<CatalogEntry> guidance_for(const std::vector<ErrorEntry>& entries) const;

  const CatalogEntry* find(std::string_view class_id) const;
  const std::vector<CatalogEntry>& entries() const { return entries_; }

 private:
  struct Compiled {
    std::vector<std::string> needles;  // lowercased substrings
    std::vector<std::regex> regexes;
  };

  std::vector<CatalogEntry> entries_;  // sorted by class order
  std::vector<Compiled> compiled_;
};

/// Directory holding catalog.json and prompt templates.
std::filesystem::path default_data_dir();

}  // namespace chiselforge
