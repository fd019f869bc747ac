#include "chiselforge/engine.hpp"

#include <algorithm>
#include <chrono>

#include "chiselforge/serialization.hpp"

namespace chiselforge {

bool CaseOutcome::operator==(const CaseOutcome& o) const {
  return case_id == o.case_id && trial == o.trial && final_verdict == o.final_verdict &&
         iterations_used == o.iterations_used && trace == o.trace && escapes_triggered == o.escapes_triggered &&
         llm_calls == o.llm_calls && timing == o.timing && usage.prompt_tokens == o.usage.prompt_tokens &&
         usage.completion_tokens == o.usage.completion_tokens && attempt_verdicts == o.attempt_verdicts &&
         last_error_kind == o.last_error_kind && error_message == o.error_message;
}

nlohmann::json EngineEvent::to_json() const {
  return {{"schema", kEventSchemaVersion}, {"type", type},           {"case_id", case_id}, {"trial", trial},
          {"attempt", attempt},            {"iteration", iteration}, {"detail", detail}};
}

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

Feedback build_feedback(const CompileResult& compile_result, const std::optional<SimResult>& sim_result) {
  if (compile_result.status == CompileStatus::Timeout) {
    throw PreconditionError("a timed-out compile carries no feedback");
  }
  if (compile_result.status != CompileStatus::Ok) {
    if (sim_result) throw PreconditionError("simulation result given for a failed compile");
    SyntaxFeedback s{compile_result.entries, compile_result.raw_log};
    if (s.entries.empty()) {
      ErrorEntry e;
      e.message = "Compilation failed without a recognisable diagnostic.";
      e.location_signature = location_signature(e);
      s.entries.push_back(std::move(e));
    }
    return Feedback{std::move(s)};
  }
  if (!sim_result) throw PreconditionError("compile succeeded and no simulation result was given");
  switch (sim_result->status) {
    case SimStatus::Pass:
      throw PreconditionError("build_feedback called for a passing candidate");
    case SimStatus::Timeout:
      throw PreconditionError("a timed-out simulation carries no feedback");
    case SimStatus::BuildError: {
      FunctionalFeedback f;
      f.mismatches.push_back({"interface", "", "testbench builds against the DUT", sim_result->raw_log, std::nullopt});
      f.failed_count = 1;
      f.total_count = 1;
      f.raw_log = sim_result->raw_log;
      return Feedback{std::move(f)};
    }
    case SimStatus::Fail:
      break;
  }
  FunctionalFeedback f{sim_result->mismatches, sim_result->failed_count, sim_result->total_count,
                       sim_result->raw_log};
  f.failed_count = std::max(f.failed_count, 1);
  f.total_count = std::max(f.total_count, f.failed_count);
  return Feedback{std::move(f)};
}

namespace {

class Session {
 public:
  Session(const EngineDeps& deps, const RunConfig& cfg, CaseOutcome& out)
      : deps_(deps), out_(out), provider_(deps.gateway.provider) {
    provider_.request_timeout_s = cfg.llm_timeout_s;
    provider_.sampling = cfg.sampling;
    if (!cfg.model_id.empty()) provider_.model_id = cfg.model_id;
  }

  const ProviderConfig& provider() const { return provider_; }

  std::string call(int LlmCallCounts::*counter, double PhaseTiming::*phase, const std::vector<ChatMessage>& msgs) {
    const double t0 = deps_.clock();
    ++(out_.llm_calls.*counter);
    try {
      auto r = complete_detailed(msgs, provider_, *deps_.gateway.transport, deps_.gateway.sleeper);
      out_.timing.*phase += deps_.clock() - t0;
      out_.usage.prompt_tokens += r.usage.prompt_tokens;
      out_.usage.completion_tokens += r.usage.completion_tokens;
      return r.text;
    } catch (...) {
      out_.timing.*phase += deps_.clock() - t0;
      throw;
    }
  }

  void emit(const std::string& type, int attempt, int iteration, nlohmann::json detail = nlohmann::json::object()) {
    if (deps_.events) deps_.events({type, out_.case_id, out_.trial, attempt, iteration, std::move(detail)});
  }

 private:
  const EngineDeps& deps_;
  CaseOutcome& out_;
  ProviderConfig provider_;
};

struct Generated {
  std::string code;
  bool malformed = false;
};

// Zero-shot runs get no format retry: exactly one generator call per trial.
Generated generate(Session& s, const EngineDeps& deps, const CaseSpec& spec, const RevisionPlan* plan,
                   const Candidate* prior, bool allow_retry) {
  auto msgs = render_generator_prompt(*deps.prompts, spec, plan, prior, deps.limits);
  const std::string first = s.call(&LlmCallCounts::generator, &PhaseTiming::generate_s, msgs);
  try {
    return {parse_code_response(first), false};
  } catch (const MalformedResponse&) {
  }
  if (!allow_retry) return {first, true};
  msgs.push_back({ChatRole::Assistant, first});
  msgs.push_back({ChatRole::User, deps.prompts->get("generator.format_reminder")});
  const std::string second = s.call(&LlmCallCounts::generator, &PhaseTiming::generate_s, msgs);
  try {
    return {parse_code_response(second), false};
  } catch (const MalformedResponse&) {
    return {second, true};
  }
}

Feedback malformed_feedback(const std::string& text) {
  ErrorEntry e;
  e.message = "The response contained no fenced code block with the module source.";
  e.location_signature = location_signature(e);
  return Feedback{SyntaxFeedback{{e}, text}};
}

std::string location_of(const ErrorEntry& e) {
  if (!e.location) return "unknown";
  return e.location->file + ":" + std::to_string(e.location->line);
}

// Plan handed to the generator when the reviewer never produced a usable one.
RevisionPlan plan_from_feedback(const Feedback& fb, const std::string& raw) {
  RevisionPlan plan;
  plan.raw_response = raw;
  if (fb.is_syntax()) {
    for (const auto& e : fb.syntax().entries) {
      plan.items.push_back({location_of(e), e.message,
                            e.suggestion ? "Use `" + *e.suggestion + "` as the compiler suggests."
                                         : "Change the code so the compiler no longer reports this error."});
    }
  } else {
    for (const auto& m : fb.functional().mismatches) {
      plan.items.push_back({"testpoint " + m.testpoint_id,
                            "For inputs " + (m.stimulus.empty() ? std::string("-") : m.stimulus) + " the design produced " +
                                m.actual + " instead of " + m.expected + ".",
                            "Correct the logic so the output matches the expected value."});
    }
    if (plan.items.empty()) {
      plan.items.push_back({"unknown", "Simulation reported functional mismatches.",
                            "Re-check the logic against the specification."});
    }
  }
  return plan;
}

RevisionPlan review(Session& s, const EngineDeps& deps, const CaseSpec& spec, const Trace& trace,
                    const Feedback& fb, const std::optional<std::string>& escape_note) {
  const auto hits = fb.is_syntax() ? deps.catalog->guidance_for(fb.syntax().entries) : std::vector<CatalogEntry>{};
  const auto msgs = render_reviewer_prompt(*deps.prompts, spec, trace, fb, hits, escape_note, deps.limits);
  std::string raw;
  for (int attempt = 0; attempt < 2; ++attempt) {
    raw = s.call(&LlmCallCounts::reviewer, &PhaseTiming::review_s, msgs);
    try {
      return parse_revision_plan(raw);
    } catch (const MalformedResponse&) {
    }
  }
  return plan_from_feedback(fb, raw);
}

}  // namespace

std::optional<LoopSpan> detect_loop(const Trace& trace, const Feedback& current_feedback, int current_iteration,
                                    const EngineDeps& deps, LlmCallCounts* calls, Usage* usage) {
  const auto candidates = loop_candidates(trace, current_feedback, current_iteration);
  if (candidates.empty()) return std::nullopt;
  const auto msgs = render_inspector_prompt(*deps.prompts, trace, current_feedback, current_iteration, deps.limits);
  if (calls) ++calls->inspector;
  LoopVerdict verdict;
  try {
    auto r = complete_detailed(msgs, deps.gateway.provider, *deps.gateway.transport, deps.gateway.sleeper);
    if (usage) {
      usage->prompt_tokens += r.usage.prompt_tokens;
      usage->completion_tokens += r.usage.completion_tokens;
    }
    verdict = parse_inspector_verdict(r.text);
  } catch (const ProviderError&) {
    return std::nullopt;
  }
  if (!verdict.is_loop || !verdict.matched_prior_iteration) return std::nullopt;
  const int j = *verdict.matched_prior_iteration;
  if (std::find(candidates.begin(), candidates.end(), j) == candidates.end()) return std::nullopt;

  const auto& prior = *std::find_if(trace.records.begin(), trace.records.end(),
                                    [&](const IterationRecord& r) { return r.candidate.iteration == j; });
  const auto current = feedback_signatures(current_feedback);
  std::string shared;
  for (const auto& sig : feedback_signatures(*prior.feedback)) {
    if (std::find(current.begin(), current.end(), sig) != current.end()) {
      shared = sig;
      break;
    }
  }
  return LoopSpan{j, current_iteration, shared, verdict.cause_summary};
}

Trace erase_loop(const Trace& trace, const LoopSpan& span) {
  if (span.start_iteration >= span.end_iteration) throw PreconditionError("loop span must have start < end");
  if (trace.records.empty() || trace.records.back().candidate.iteration != span.end_iteration) {
    throw PreconditionError("loop span must end at the last record");
  }
  auto start = std::find_if(trace.records.begin(), trace.records.end(), [&](const IterationRecord& r) {
    return r.candidate.iteration == span.start_iteration;
  });
  if (start == trace.records.end()) throw PreconditionError("loop span start is not in the trace");

  Trace out;
  out.records.assign(trace.records.begin(), start + 1);
  out.erasures = trace.erasures;
  Erasure e;
  e.span_start = span.start_iteration;
  e.span_end = span.end_iteration;
  e.erased_records.assign(start + 1, trace.records.end());
  e.cause_summary = span.cause_summary;
  e.superseded_plan = out.records.back().plan;
  out.records.back().plan.reset();
  out.erasures.push_back(std::move(e));
  return out;
}

CaseOutcome run_case(const CaseSpec& spec, const RunConfig& cfg, const EngineDeps& deps, int trial) {
  if (spec.excluded) throw PreconditionError("case " + spec.case_id + " is excluded: " + *spec.excluded);
  if (!deps.gateway.transport || !deps.compiler || !deps.simulator || !deps.catalog || !deps.prompts) {
    throw PreconditionError("engine dependencies are incomplete");
  }
  cfg.validate();

  CaseOutcome out;
  out.case_id = spec.case_id;
  out.trial = trial;
  Session s(deps, cfg, out);
  EngineDeps inspector_deps = deps;
  inspector_deps.gateway.provider = s.provider();

  Trace trace;
  std::optional<Candidate> prior;
  std::optional<std::string> escape_note;
  Provenance provenance = Provenance::InitialGeneration;
  int attempt = 0;

  auto finish = [&](Verdict v, int iteration, std::string message = {}) {
    out.final_verdict = v;
    out.error_message = std::move(message);
    out.trace = trace;
    s.emit("finished", attempt, iteration,
           {{"verdict", std::string(to_string(v))}, {"iterations_used", out.iterations_used}});
    return out;
  };

  for (;; ++attempt) {
    const int iteration = trace.next_iteration();
    out.iterations_used = attempt;
    s.emit("iteration_started", attempt, iteration);
    try {
      const RevisionPlan* plan = prior ? &*trace.records.back().plan : nullptr;
      const Generated gen = generate(s, deps, spec, plan, prior ? &*prior : nullptr, cfg.max_iterations > 0);
      s.emit("generated", attempt, iteration, {{"malformed", gen.malformed}});

      Candidate cand{iteration, gen.code, std::nullopt, provenance};
      std::optional<Feedback> fb;
      Verdict verdict = Verdict::Success;
      if (gen.malformed) {
        fb = malformed_feedback(gen.code);
        verdict = Verdict::SyntaxError;
      } else {
        double t0 = deps.clock();
        const CompileResult cr = deps.compiler->compile_candidate(cand, spec, cfg.compile_timeout_s);
        out.timing.compile_s += deps.clock() - t0;
        s.emit("compiled", attempt, iteration,
               {{"status", cr.status == CompileStatus::Ok       ? "ok"
                           : cr.status == CompileStatus::Failed ? "failed"
                                                                : "timeout"},
                {"errors", cr.entries.size()}});
        if (cr.status == CompileStatus::Timeout) {
          out.attempt_verdicts.push_back(Verdict::ToolTimeout);
          return finish(Verdict::ToolTimeout, iteration, "compile exceeded " + std::to_string(cfg.compile_timeout_s) + " s");
        }
        if (cr.status == CompileStatus::Ok) {
          cand.verilog_src = cr.verilog_src;
          t0 = deps.clock();
          const SimResult sr = deps.simulator->simulate_candidate(cr.verilog_src, spec, cfg.sim_timeout_s, cfg.seed);
          out.timing.simulate_s += deps.clock() - t0;
          s.emit("simulated", attempt, iteration,
                 {{"status", sr.status == SimStatus::Pass      ? "pass"
                             : sr.status == SimStatus::Fail    ? "fail"
                             : sr.status == SimStatus::Timeout ? "timeout"
                                                               : "build_error"},
                  {"failed", sr.failed_count},
                  {"total", sr.total_count}});
          if (sr.status == SimStatus::Timeout) {
            out.attempt_verdicts.push_back(Verdict::ToolTimeout);
            return finish(Verdict::ToolTimeout, iteration, "simulation exceeded " + std::to_string(cfg.sim_timeout_s) + " s");
          }
          verdict = classify_verdict(true, sr.status == SimStatus::Pass);
          if (verdict != Verdict::Success) fb = build_feedback(cr, sr);
        } else {
          verdict = classify_verdict(false, std::nullopt);
          fb = build_feedback(cr, std::nullopt);
        }
      }

      trace = append_record(trace, IterationRecord{std::move(cand), fb, std::nullopt, verdict});
      out.attempt_verdicts.push_back(verdict);
      if (verdict == Verdict::Success) return finish(Verdict::Success, iteration);

      bool escaped = false;
      if (cfg.escape_enabled) {
        const double t0 = deps.clock();
        auto span = detect_loop(trace, *fb, iteration, inspector_deps, &out.llm_calls, &out.usage);
        out.timing.inspect_s += deps.clock() - t0;
        if (span) {
          trace = erase_loop(trace, *span);
          ++out.escapes_triggered;
          escape_note = span->cause_summary.empty() ? "the approach repeated between iterations " +
                                                          std::to_string(span->start_iteration) + " and " +
                                                          std::to_string(span->end_iteration)
                                                    : span->cause_summary;
          escaped = true;
          s.emit("escaped", attempt, iteration,
                 {{"span_start", span->start_iteration},
                  {"span_end", span->end_iteration},
                  {"signature", span->matched_signature},
                  {"cause_summary", span->cause_summary}});
        }
      }

      if (attempt >= cfg.max_iterations) {
        out.last_error_kind = verdict;
        return finish(Verdict::Exhausted, iteration);
      }

      RevisionPlan next_plan = review(s, deps, spec, trace, *fb, escape_note);
      s.emit("reviewed", attempt, iteration, {{"items", next_plan.items.size()}});
      trace.records.back().plan = std::move(next_plan);
      prior = trace.records.back().candidate;
      provenance = escaped ? Provenance::PostEscapeRevision : Provenance::Revision;
    } catch (const ProviderError& e) {
      // A failure while reviewing keeps the attempt's own verdict.
      if (static_cast<int>(out.attempt_verdicts.size()) == attempt) out.attempt_verdicts.push_back(Verdict::ProviderError);
      return finish(Verdict::ProviderError, iteration, e.what());
    }
  }
}

}  // namespace chiselforge
