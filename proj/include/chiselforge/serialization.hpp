#pragma once

// Canonical structured-text form of the domain types. Field names follow the
// domain model; objects serialize with sorted keys so output is byte-stable.

#include "json.hpp"

#include "chiselforge/domain.hpp"

namespace chiselforge {

using Json = nlohmann::json;

void to_json(Json& j, const CaseSpec& v);
void from_json(const Json& j, CaseSpec& v);
void to_json(Json& j, const Candidate& v);
void from_json(const Json& j, Candidate& v);
void to_json(Json& j, const SourceLocation& v);
void from_json(const Json& j, SourceLocation& v);
void to_json(Json& j, const ErrorEntry& v);
void from_json(const Json& j, ErrorEntry& v);
void to_json(Json& j, const MismatchEntry& v);
void from_json(const Json& j, MismatchEntry& v);
void to_json(Json& j, const Feedback& v);
void from_json(const Json& j, Feedback& v);
void to_json(Json& j, const PlanItem& v);
void from_json(const Json& j, PlanItem& v);
void to_json(Json& j, const RevisionPlan& v);
void from_json(const Json& j, RevisionPlan& v);
void to_json(Json& j, const IterationRecord& v);
void from_json(const Json& j, IterationRecord& v);
void to_json(Json& j, const Erasure& v);
void from_json(const Json& j, Erasure& v);
void to_json(Json& j, const Trace& v);
void from_json(const Json& j, Trace& v);
void to_json(Json& j, const Sampling& v);
void from_json(const Json& j, Sampling& v);
void to_json(Json& j, const RunConfig& v);
void from_json(const Json& j, RunConfig& v);
void to_json(Json& j, Verdict v);
void from_json(const Json& j, Verdict& v);

}  // namespace chiselforge
