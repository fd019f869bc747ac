#include "doctest.h"
#include "chiselforge/domain.hpp"
#include "chiselforge/serialization.hpp"
#include "support.hpp"

using namespace chiselforge;
using cftest::Gen;

namespace {

ErrorEntry entry(const std::string& msg, int line, std::optional<std::string> cls = std::nullopt) {
  ErrorEntry e;
  e.message = msg;
  e.location = SourceLocation{"Top.scala", line, 5};
  e.catalog_class = std::move(cls);
  return e;
}

IterationRecord failing(int iteration, const std::string& msg) {
  IterationRecord r;
  r.candidate.iteration = iteration;
  r.candidate.chisel_src = "class Top";
  r.candidate.provenance = iteration == 0 ? Provenance::InitialGeneration : Provenance::Revision;
  auto e = entry(msg, 10 + iteration);
  e.location_signature = location_signature(e);
  r.feedback = Feedback{SyntaxFeedback{{e}, msg}};
  r.verdict = Verdict::SyntaxError;
  return r;
}

}  // namespace

TEST_CASE("classify_verdict over its domain") {
  CHECK(classify_verdict(true, true) == Verdict::Success);
  CHECK(classify_verdict(false, std::nullopt) == Verdict::SyntaxError);
  CHECK(classify_verdict(true, false) == Verdict::FunctionalError);
  CHECK_THROWS_AS(classify_verdict(false, true), PreconditionError);
  CHECK_THROWS_AS(classify_verdict(false, false), PreconditionError);
  CHECK_THROWS_AS(classify_verdict(true, std::nullopt), PreconditionError);
}

TEST_CASE("enum strings round-trip") {
  for (auto v : {Verdict::Success, Verdict::SyntaxError, Verdict::FunctionalError, Verdict::ToolTimeout,
                 Verdict::ProviderError, Verdict::Exhausted}) {
    CHECK(verdict_from_string(to_string(v)) == v);
  }
  for (auto p : {Provenance::InitialGeneration, Provenance::Revision, Provenance::PostEscapeRevision}) {
    CHECK(provenance_from_string(to_string(p)) == p);
  }
  CHECK_THROWS(verdict_from_string("bogus"));
}

TEST_CASE("location_signature ignores line numbers") {
  CHECK(location_signature(entry("Reference w not fully initialized.", 14, "B3")) ==
        location_signature(entry("Reference w not fully initialized.", 17, "B3")));
  CHECK(location_signature(entry("Value sgnal is not a member", 3, "A1")) !=
        location_signature(entry("Value foo is not a member", 3, "A1")));
  CHECK(location_signature(entry("Reference w not fully initialized.", 3, "A1")) !=
        location_signature(entry("Reference w not fully initialized.", 3, "B3")));

  ErrorEntry unknown;
  unknown.message = "Something odd happened at 42";
  CHECK_FALSE(location_signature(unknown).empty());
  CHECK(location_signature(unknown).find("42") == std::string::npos);
}

TEST_CASE("named_construct extracts the identifier") {
  CHECK(named_construct("Value sgnal is not a member. Did you mean signal?") == std::optional<std::string>("sgnal"));
  CHECK(named_construct("Reference w not fully initialized.") == std::optional<std::string>("w"));
}

TEST_CASE("normalized_message_head strips numerals and case") {
  CHECK(normalized_message_head("Found 2, expected 1\nsecond line") == "found #, expected #");
  CHECK(normalized_message_head("  A   B  ") == "a b");
}

TEST_CASE("property: signature invariant under renumbering") {
  Gen g(11);
  const std::vector<std::string> templates{"Reference {} not fully initialized.", "Value {} is not a member.",
                                           "not found: value {}", "{} must be hardware, not a bare Chisel type"};
  for (int i = 0; i < 500; ++i) {
    std::string msg = g.pick(templates);
    msg.replace(msg.find("{}"), 2, g.identifier());
    ErrorEntry a = entry(msg, g.integer(1, 5000));
    ErrorEntry b = a;
    b.location->line = g.integer(1, 5000);
    b.location->column = g.coin() ? std::optional<int>(g.integer(1, 200)) : std::nullopt;
    REQUIRE(location_signature(a) == location_signature(b));
  }
}

TEST_CASE("append_record enforces order and invariants") {
  Trace t;
  t = append_record(t, failing(0, "a"));
  CHECK(t.records.size() == 1);
  t = append_record(t, failing(1, "b"));
  t = append_record(t, failing(2, "c"));
  const Trace before = t;
  const Trace after = append_record(t, failing(3, "d"));
  CHECK(after.records.size() == 4);
  CHECK(std::equal(before.records.begin(), before.records.end(), after.records.begin()));
  CHECK(t == before);
  CHECK_THROWS_AS(append_record(t, failing(5, "gap")), PreconditionError);
  CHECK_THROWS_AS(append_record(t, failing(1, "back")), PreconditionError);

  auto bad = failing(3, "x");
  bad.verdict = Verdict::Success;
  CHECK_THROWS_AS(append_record(t, bad), PreconditionError);
  auto revision_first = failing(0, "x");
  revision_first.candidate.provenance = Provenance::Revision;
  CHECK_THROWS_AS(append_record(Trace{}, revision_first), PreconditionError);
}

TEST_CASE("feedback validation") {
  CHECK_THROWS_AS(Feedback{SyntaxFeedback{}}.validate(), PreconditionError);
  CHECK_THROWS_AS((Feedback{FunctionalFeedback{{}, 0, 3, ""}}.validate()), PreconditionError);
  CHECK_THROWS_AS((Feedback{FunctionalFeedback{{}, 4, 3, ""}}.validate()), PreconditionError);
  CHECK_NOTHROW((Feedback{FunctionalFeedback{{}, 2, 3, ""}}.validate()));
}

TEST_CASE("RunConfig validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.k_values = {1, 11};
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = RunConfig{};
  c.sim_timeout_s = 0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = RunConfig{};
  c.max_iterations = -1;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
}

TEST_CASE("property: trace serialization round-trips") {
  Gen g(29);
  for (int round = 0; round < 200; ++round) {
    Trace t;
    const int n = g.integer(0, 6);
    for (int i = 0; i < n; ++i) {
      IterationRecord r;
      r.candidate.iteration = i;
      r.candidate.chisel_src = g.text(80);
      r.candidate.provenance = i == 0 ? Provenance::InitialGeneration
                                      : (g.coin() ? Provenance::Revision : Provenance::PostEscapeRevision);
      const bool last = i == n - 1;
      if (last && g.coin(0.3)) {
        r.verdict = Verdict::Success;
        r.candidate.verilog_src = "module Top; endmodule";
      } else if (g.coin()) {
        ErrorEntry e;
        e.message = "m" + g.text(40);
        if (g.coin()) e.location = SourceLocation{g.identifier() + ".scala", g.integer(1, 99),
                                                  g.coin() ? std::optional<int>(g.integer(1, 9)) : std::nullopt};
        if (g.coin()) e.suggestion = g.identifier();
        if (g.coin()) e.catalog_class = "B3";
        e.kind = g.coin() ? ErrorKind::Syntax : ErrorKind::FunctionalStatic;
        e.location_signature = location_signature(e);
        r.feedback = Feedback{SyntaxFeedback{{e}, g.text(60)}};
        r.verdict = Verdict::SyntaxError;
      } else {
        MismatchEntry m{std::to_string(g.integer(0, 9)), g.text(10), "1", "0",
                        g.coin() ? std::optional<double>(g.integer(0, 1000) * 0.5) : std::nullopt};
        r.feedback = Feedback{FunctionalFeedback{{m}, 1, g.integer(1, 9), g.text(30)}};
        r.verdict = Verdict::FunctionalError;
      }
      if (!r.feedback || g.coin()) {
        if (r.feedback) r.plan = RevisionPlan{{{"loc", "cause " + g.text(10), "fix " + g.text(10)}}, g.text(50)};
      }
      t = append_record(t, r);
    }
    if (n > 1 && g.coin(0.3)) {
      Erasure e;
      e.span_start = 0;
      e.span_end = 1;
      e.erased_records = {t.records[1]};
      e.cause_summary = g.text(20);
      t.erasures.push_back(e);
    }
    const std::string text = nlohmann::json(t).dump();
    const Trace back = nlohmann::json::parse(text).get<Trace>();
    REQUIRE(back == t);
    REQUIRE(nlohmann::json(back).dump() == text);
  }
}
