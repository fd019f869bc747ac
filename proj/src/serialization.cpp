#include "chiselforge/serialization.hpp"

namespace chiselforge {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

}  // namespace

void to_json(Json& j, Verdict v) { j = std::string(to_string(v)); }
void from_json(const Json& j, Verdict& v) { v = verdict_from_string(j.get<std::string>()); }

void to_json(Json& j, const CaseSpec& v) {
  j = Json{{"case_id", v.case_id},         {"spec_text", v.spec_text},
           {"testbench_src", v.testbench_src}, {"reference_src", opt(v.reference_src)},
           {"module_name", v.module_name}, {"origin", v.origin},
           {"excluded", opt(v.excluded)},  {"seed", opt(v.seed)}};
}
void from_json(const Json& j, CaseSpec& v) {
  v.case_id = j.at("case_id").get<std::string>();
  v.spec_text = j.at("spec_text").get<std::string>();
  v.testbench_src = j.at("testbench_src").get<std::string>();
  v.reference_src = get_opt<std::string>(j, "reference_src");
  v.module_name = j.at("module_name").get<std::string>();
  v.origin = j.value("origin", "");
  v.excluded = get_opt<std::string>(j, "excluded");
  v.seed = get_opt<long>(j, "seed");
}

void to_json(Json& j, const Candidate& v) {
  j = Json{{"iteration", v.iteration},
           {"chisel_src", v.chisel_src},
           {"verilog_src", opt(v.verilog_src)},
           {"provenance", std::string(to_string(v.provenance))}};
}
void from_json(const Json& j, Candidate& v) {
  v.iteration = j.at("iteration").get<int>();
  v.chisel_src = j.at("chisel_src").get<std::string>();
  v.verilog_src = get_opt<std::string>(j, "verilog_src");
  v.provenance = provenance_from_string(j.at("provenance").get<std::string>());
}

void to_json(Json& j, const SourceLocation& v) {
  j = Json{{"file", v.file}, {"line", v.line}, {"column", opt(v.column)}};
}
void from_json(const Json& j, SourceLocation& v) {
  v.file = j.at("file").get<std::string>();
  v.line = j.at("line").get<int>();
  v.column = get_opt<int>(j, "column");
}

void to_json(Json& j, const ErrorEntry& v) {
  j = Json{{"kind", std::string(to_string(v.kind))},
           {"location", opt(v.location)},
           {"message", v.message},
           {"suggestion", opt(v.suggestion)},
           {"catalog_class", opt(v.catalog_class)},
           {"location_signature", v.location_signature}};
}
void from_json(const Json& j, ErrorEntry& v) {
  v.kind = error_kind_from_string(j.at("kind").get<std::string>());
  v.location = get_opt<SourceLocation>(j, "location");
  v.message = j.at("message").get<std::string>();
  v.suggestion = get_opt<std::string>(j, "suggestion");
  v.catalog_class = get_opt<std::string>(j, "catalog_class");
  v.location_signature = j.at("location_signature").get<std::string>();
}

void to_json(Json& j, const MismatchEntry& v) {
  j = Json{{"testpoint_id", v.testpoint_id}, {"stimulus", v.stimulus},
           {"expected", v.expected},         {"actual", v.actual},
           {"time", opt(v.time)}};
}
void from_json(const Json& j, MismatchEntry& v) {
  v.testpoint_id = j.at("testpoint_id").get<std::string>();
  v.stimulus = j.at("stimulus").get<std::string>();
  v.expected = j.at("expected").get<std::string>();
  v.actual = j.at("actual").get<std::string>();
  v.time = get_opt<double>(j, "time");
}

void to_json(Json& j, const Feedback& v) {
  if (v.is_syntax()) {
    const auto& s = v.syntax();
    j = Json{{"variant", "syntax"}, {"entries", s.entries}, {"raw_log", s.raw_log}};
  } else {
    const auto& f = v.functional();
    j = Json{{"variant", "functional"},
             {"mismatches", f.mismatches},
             {"failed_count", f.failed_count},
             {"total_count", f.total_count},
             {"raw_log", f.raw_log}};
  }
}
void from_json(const Json& j, Feedback& v) {
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "syntax") {
    SyntaxFeedback s;
    s.entries = j.at("entries").get<std::vector<ErrorEntry>>();
    s.raw_log = j.at("raw_log").get<std::string>();
    v.variant = std::move(s);
  } else if (variant == "functional") {
    FunctionalFeedback f;
    f.mismatches = j.at("mismatches").get<std::vector<MismatchEntry>>();
    f.failed_count = j.at("failed_count").get<int>();
    f.total_count = j.at("total_count").get<int>();
    f.raw_log = j.at("raw_log").get<std::string>();
    v.variant = std::move(f);
  } else {
    throw PreconditionError("unknown feedback variant: " + variant);
  }
}

void to_json(Json& j, const PlanItem& v) {
  j = Json{{"location", v.location},
           {"cause_analysis", v.cause_analysis},
           {"solution", v.solution}};
}
void from_json(const Json& j, PlanItem& v) {
  v.location = j.at("location").get<std::string>();
  v.cause_analysis = j.at("cause_analysis").get<std::string>();
  v.solution = j.at("solution").get<std::string>();
}

void to_json(Json& j, const RevisionPlan& v) {
  j = Json{{"items", v.items}, {"raw_response", v.raw_response}};
}
void from_json(const Json& j, RevisionPlan& v) {
  v.items = j.at("items").get<std::vector<PlanItem>>();
  v.raw_response = j.at("raw_response").get<std::string>();
}

void to_json(Json& j, const IterationRecord& v) {
  j = Json{{"candidate", v.candidate},
           {"feedback", opt(v.feedback)},
           {"plan", opt(v.plan)},
           {"verdict", v.verdict}};
}
void from_json(const Json& j, IterationRecord& v) {
  v.candidate = j.at("candidate").get<Candidate>();
  v.feedback = get_opt<Feedback>(j, "feedback");
  v.plan = get_opt<RevisionPlan>(j, "plan");
  v.verdict = j.at("verdict").get<Verdict>();
}

void to_json(Json& j, const Erasure& v) {
  j = Json{{"span_start", v.span_start},
           {"span_end", v.span_end},
           {"erased_records", v.erased_records},
           {"cause_summary", v.cause_summary},
           {"superseded_plan", opt(v.superseded_plan)}};
}
void from_json(const Json& j, Erasure& v) {
  v.span_start = j.at("span_start").get<int>();
  v.span_end = j.at("span_end").get<int>();
  v.erased_records = j.at("erased_records").get<std::vector<IterationRecord>>();
  v.cause_summary = j.value("cause_summary", "");
  v.superseded_plan = get_opt<RevisionPlan>(j, "superseded_plan");
}

void to_json(Json& j, const Trace& v) {
  j = Json{{"records", v.records}, {"erasures", v.erasures}};
}
void from_json(const Json& j, Trace& v) {
  v.records = j.at("records").get<std::vector<IterationRecord>>();
  v.erasures = j.at("erasures").get<std::vector<Erasure>>();
}

void to_json(Json& j, const Sampling& v) {
  if (v.provider_default) {
    j = Json{{"mode", "default"}};
  } else {
    j = Json{{"mode", "explicit"}, {"temperature", v.temperature}, {"top_p", v.top_p}};
  }
}
void from_json(const Json& j, Sampling& v) {
  v = Sampling{};
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw PreconditionError("sampling must be 'default' or an object");
    return;
  }
  v.provider_default = j.value("mode", "default") == "default";
  v.temperature = j.value("temperature", 1.0);
  v.top_p = j.value("top_p", 1.0);
}

void to_json(Json& j, const RunConfig& v) {
  j = Json{{"max_iterations", v.max_iterations},
           {"trials", v.trials},
           {"k_values", v.k_values},
           {"model_id", v.model_id},
           {"sampling", v.sampling},
           {"compile_timeout_s", v.compile_timeout_s},
           {"sim_timeout_s", v.sim_timeout_s},
           {"llm_timeout_s", v.llm_timeout_s},
           {"parallelism", v.parallelism},
           {"escape_enabled", v.escape_enabled},
           {"seed", v.seed}};
}
void from_json(const Json& j, RunConfig& v) {
  RunConfig d;
  v.max_iterations = j.value("max_iterations", d.max_iterations);
  v.trials = j.value("trials", d.trials);
  v.k_values = j.value("k_values", d.k_values);
  v.model_id = j.value("model_id", d.model_id);
  v.sampling = j.contains("sampling") ? j.at("sampling").get<Sampling>() : d.sampling;
  v.compile_timeout_s = j.value("compile_timeout_s", d.compile_timeout_s);
  v.sim_timeout_s = j.value("sim_timeout_s", d.sim_timeout_s);
  v.llm_timeout_s = j.value("llm_timeout_s", d.llm_timeout_s);
  v.parallelism = j.value("parallelism", d.parallelism);
  v.escape_enabled = j.value("escape_enabled", d.escape_enabled);
  v.seed = j.value("seed", d.seed);
}

}  // namespace chiselforge
