#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "chiselforge/catalog.hpp"
#include "chiselforge/domain.hpp"

namespace chiselforge {

/// Splits a Chisel/Scala/FIRRTL toolchain log into one ErrorEntry per
/// distinct diagnostic, in log order.
///
/// Recognised forms: `file:line[:col]: message` (scalac, firtool), Scala 3
/// boxed errors (`-- [E006] ... Error: file:line:col`), thrown elaboration
/// exceptions carrying `@[file line:col]` locators, `error: message`, and bare
/// lines matching a catalog pattern. Continuation lines (`found:`,
/// `required:`, `Did you mean`, `Sample path`, `| ...`) are folded into the
/// preceding diagnostic. Every entry is stamped with its catalog class and
/// location signature.
///
/// A nonblank log with no recognisable diagnostic yields one entry with an
/// unknown location whose message is the head of the log. An empty log
/// yields no entries.
std::vector<ErrorEntry> parse_diagnostics(std::string_view raw_log,
                                          const ErrorCatalog& catalog = ErrorCatalog::builtin());

/// Compiler-style text for a list of entries. Parsing the rendering gives
/// back the same entries.
std::string render_diagnostics(const std::vector<ErrorEntry>& entries);

}  // namespace chiselforge
