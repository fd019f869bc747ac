#include "doctest.h"
#include "chiselforge/diagnostics.hpp"
#include "chiselforge/prompts.hpp"
#include "support.hpp"

using namespace chiselforge;
namespace fs = std::filesystem;

namespace {

const PromptLibrary& lib() { return PromptLibrary::builtin(); }

Feedback syntax_fb(const std::string& log) { return Feedback{SyntaxFeedback{parse_diagnostics(log), log}}; }

Feedback functional_fb(const std::string& id, int failed = 1, int total = 4) {
  return Feedback{FunctionalFeedback{{MismatchEntry{id, "a=1", "1", "0", std::nullopt}}, failed, total, "log"}};
}

RevisionPlan plan(const std::string& solution) { return RevisionPlan{{{"io.out", "wrong operand", solution}}, ""}; }

IterationRecord failing(int i, Feedback fb, std::optional<RevisionPlan> p = std::nullopt) {
  IterationRecord r;
  r.candidate.iteration = i;
  r.candidate.chisel_src = "class Adder extends Module { /* v" + std::to_string(i) + " */ }";
  r.feedback = std::move(fb);
  r.plan = std::move(p);
  r.verdict = r.feedback->is_syntax() ? Verdict::SyntaxError : Verdict::FunctionalError;
  return r;
}

const std::string kB3 = "Top.scala:14:5: Reference w not fully initialized.";
const std::string kA1 = "Top.scala:3:1: Value sgnal is not a member. Did you mean signal?";

}  // namespace

TEST_CASE("templates load and carry role markers") {
  CHECK(lib().version() == "1");
  CHECK(agent_role_of(lib().get("generator.system")) == std::optional<std::string>("generator"));
  CHECK(agent_role_of(lib().get("reviewer.system")) == std::optional<std::string>("reviewer"));
  CHECK(agent_role_of(lib().get("inspector.system")) == std::optional<std::string>("inspector"));
  CHECK_FALSE(agent_role_of("no marker").has_value());
  CHECK_THROWS(lib().get("nonexistent"));

  cftest::TempDir dir;
  CHECK_THROWS(PromptLibrary::load(dir.path()));
}

TEST_CASE("fill substitutes once and rejects missing keys") {
  cftest::TempDir dir;
  for (const auto& e : fs::directory_iterator(fs::path(CHISELFORGE_DATA_DIR) / "prompts")) {
    fs::copy_file(e.path(), dir / e.path().filename());
  }
  cftest::write_file(dir / "generator.initial.txt", "A {{spec}} B {{module_name}}\n\n");
  const auto l = PromptLibrary::load(dir.path());
  CHECK(l.get("generator.initial") == "A {{spec}} B {{module_name}}");
  // Values containing placeholders are not expanded again.
  CHECK(l.fill("generator.initial", {{"spec", "{{module_name}}"}, {"module_name", "X"}}) == "A {{module_name}} B X");
  CHECK_THROWS(l.fill("generator.initial", {{"spec", "s"}}));
}

TEST_CASE("zero-shot and revision generator prompts") {
  const auto spec = cftest::adder_case();
  auto m = render_generator_prompt(lib(), spec, nullptr, nullptr);
  REQUIRE(m.size() == 2);
  CHECK(m[0].role == ChatRole::System);
  CHECK(m[1].role == ChatRole::User);
  CHECK(m[1].content.find(spec.spec_text) != std::string::npos);
  CHECK(m[1].content.find("`Adder`") != std::string::npos);

  Candidate prior;
  prior.chisel_src = "class Adder extends Module { val x = 1 }\n";
  const auto p = plan("use +& to keep the carry");
  m = render_generator_prompt(lib(), spec, &p, &prior);
  REQUIRE(m.size() == 2);
  CHECK(m[1].content.find("val x = 1") != std::string::npos);
  CHECK(m[1].content.find("SOLUTION: use +& to keep the carry") != std::string::npos);
  CHECK_THROWS_AS(render_generator_prompt(lib(), spec, &p, nullptr), PreconditionError);
}

TEST_CASE("rendering is pure") {
  const auto spec = cftest::adder_case();
  Trace t;
  t = append_record(t, failing(0, syntax_fb(kA1), plan("rename")));
  t = append_record(t, failing(1, syntax_fb(kB3)));
  const auto fb = syntax_fb(kB3);
  CHECK(render_reviewer_prompt(lib(), spec, t, fb, {}) == render_reviewer_prompt(lib(), spec, t, fb, {}));
  CHECK(render_inspector_prompt(lib(), t, fb, 1) == render_inspector_prompt(lib(), t, fb, 1));
}

TEST_CASE("feedback and plan rendering") {
  const auto s = render_feedback(syntax_fb(kA1));
  CHECK(s.find("[A1] Top.scala:3:1") != std::string::npos);
  CHECK(s.find("compiler suggestion: signal") != std::string::npos);

  auto f = functional_fb("t7", 3, 10);
  const auto r = render_feedback(f);
  CHECK(r.find("3 of 10") != std::string::npos);
  CHECK(r.find("testpoint t7") != std::string::npos);
  CHECK(r.find("2 further mismatches") != std::string::npos);

  CHECK(render_plan(plan("x")) == "ITEM 1\nLOCATION: io.out\nCAUSE: wrong operand\nSOLUTION: x");
}

TEST_CASE("reviewer prompt contents") {
  const auto spec = cftest::adder_case();
  Trace t;
  t = append_record(t, failing(0, syntax_fb(kA1), plan("rename the signal")));
  t = append_record(t, failing(1, syntax_fb(kB3)));
  const auto fb = t.records.back().feedback.value();
  const auto hits = ErrorCatalog::builtin().guidance_for(fb.syntax().entries);
  const auto m = render_reviewer_prompt(lib(), spec, t, fb, hits, std::string("assigned w twice"));
  REQUIRE(m.size() == 2);
  const auto& u = m[1].content;
  CHECK(u.find("iteration 1") != std::string::npos);
  CHECK(u.find("/* v1 */") != std::string::npos);
  CHECK(u.find("### B3") != std::string::npos);
  CHECK(u.find("assigned w twice") != std::string::npos);
  CHECK(u.find("### Iteration 0") != std::string::npos);
  CHECK(u.find("rename the signal") != std::string::npos);
  CHECK_THROWS_AS(render_reviewer_prompt(lib(), spec, Trace{}, fb, {}), PreconditionError);
}

TEST_CASE("reviewer history is most recent first and older entries are summarised") {
  const auto spec = cftest::adder_case();
  Trace t;
  for (int i = 0; i < 8; ++i) t = append_record(t, failing(i, functional_fb("t" + std::to_string(i)), plan("fix " + std::to_string(i))));
  PromptLimits lim;
  lim.full_detail_window = 2;
  const auto u = render_reviewer_prompt(lib(), spec, t, t.records.back().feedback.value(), {}, std::nullopt, lim)[1].content;
  const auto p6 = u.find("### Iteration 6");
  const auto p5 = u.find("### Iteration 5");
  REQUIRE(p6 != std::string::npos);
  REQUIRE(p5 != std::string::npos);
  CHECK(p6 < p5);
  CHECK(u.find("### Iteration 4") == std::string::npos);
  CHECK(u.find("- Iteration 4:") != std::string::npos);
  CHECK(u.find("- Iteration 0:") != std::string::npos);
}

TEST_CASE("property: every prompt fits its budget") {
  cftest::Gen g(11);
  const auto spec = cftest::adder_case();
  for (int round = 0; round < 60; ++round) {
    Trace t;
    const int n = g.integer(1, 12);
    for (int i = 0; i < n; ++i) {
      auto r = failing(i, g.coin() ? syntax_fb(kB3 + "\n" + g.text(g.integer(0, 3000))) : functional_fb("tp"),
                       plan(g.text(g.integer(1, 2000))));
      r.candidate.chisel_src = g.text(g.integer(10, 4000));
      t = append_record(t, r);
    }
    PromptLimits lim;
    lim.context_budget_chars = static_cast<std::size_t>(g.integer(2500, 20000));
    lim.full_detail_window = g.integer(0, 6);
    const auto fb = t.records.back().feedback.value();
    CAPTURE(lim.context_budget_chars);
    CHECK(total_chars(render_reviewer_prompt(lib(), spec, t, fb, {}, std::nullopt, lim)) <= lim.context_budget_chars);
    CHECK(total_chars(render_inspector_prompt(lib(), t, fb, n, lim)) <= lim.context_budget_chars);
    Candidate prior = t.records.back().candidate;
    const auto p = t.records.back().plan.value();
    CHECK(total_chars(render_generator_prompt(lib(), spec, &p, &prior, lim)) <= lim.context_budget_chars);
  }
}

TEST_CASE("loop candidates share a location signature") {
  Trace t;
  t = append_record(t, failing(0, syntax_fb(kB3)));
  t = append_record(t, failing(1, syntax_fb(kA1)));
  t = append_record(t, failing(2, syntax_fb("Top.scala:40:5: Reference w not fully initialized.")));
  CHECK(loop_candidates(t, syntax_fb(kB3), 3) == std::vector<int>{2, 0});
  CHECK(loop_candidates(t, syntax_fb(kB3), 2) == std::vector<int>{0});
  CHECK(loop_candidates(t, functional_fb("t0"), 3).empty());

  const auto m = render_inspector_prompt(lib(), t, syntax_fb(kB3), 3);
  CHECK(m[1].content.find("Comparison with iteration 2") != std::string::npos);
  CHECK(m[1].content.find("Comparison with iteration 0") != std::string::npos);
  CHECK(m[1].content.find("Comparison with iteration 1") == std::string::npos);
}

TEST_CASE("code extraction") {
  CHECK(parse_code_response("Sure:\n```scala\nclass A\n```\n") == "class A");
  CHECK(parse_code_response("```\nfirst\n```\ntext\n```scala\nsecond\n```") == "second");
  CHECK(parse_code_response("```scala\nclass Unclosed\n") == "class Unclosed");
  CHECK_THROWS_AS(parse_code_response("no code here"), MalformedResponse);
  CHECK_THROWS_AS(parse_code_response("```scala\n```"), MalformedResponse);
}

TEST_CASE("property: fenced bodies round-trip exactly") {
  cftest::Gen g(5);
  for (int i = 0; i < 300; ++i) {
    std::string body = g.text(g.integer(1, 400));
    // Bodies never contain a fence at line start by construction.
    for (std::size_t p = body.find("```"); p != std::string::npos; p = body.find("```")) body.replace(p, 3, "''");
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    while (!body.empty() && (body.front() == '\n')) body.erase(0, 1);
    if (body.empty()) continue;
    const std::string reply = g.text(g.integer(0, 50)) + "\n```" + (g.coin() ? "scala" : "") + "\n" + body + "\n```\n" +
                              g.text(g.integer(0, 50));
    CAPTURE(reply);
    REQUIRE(parse_code_response(reply) == body);
  }
}

TEST_CASE("revision plan parsing") {
  auto p = parse_revision_plan(cftest::kReviewerReply);
  REQUIRE(p.items.size() == 1);
  CHECK(p.items[0].location == "io.sum assignment");

  p = parse_revision_plan(
      "**ERROR 1**\n- **Location:** line 4\n- **Cause analysis:** the wire is read before\n  it is driven\n"
      "- **Fix:** add a default\n\nERROR 2\nCause: width\nSolution: pad\n");
  REQUIRE(p.items.size() == 2);
  CHECK(p.items[0].location == "line 4");
  CHECK(p.items[0].cause_analysis == "the wire is read before\n  it is driven");
  CHECK(p.items[0].solution == "add a default");
  CHECK(p.items[1].location == "unspecified");
  CHECK(p.items[1].solution == "pad");

  CHECK_THROWS_AS(parse_revision_plan("I think it is fine."), MalformedResponse);
  CHECK_THROWS_AS(parse_revision_plan("LOCATION: x\nCAUSE: y\n"), MalformedResponse);
}

TEST_CASE("inspector verdict parsing resolves ambiguity to no loop") {
  auto v = parse_inspector_verdict("IS_LOOP: yes\nMATCHED_ITERATION: 2\nCAUSE_SUMMARY: same width bug");
  CHECK(v.is_loop);
  CHECK(v.matched_prior_iteration == std::optional<int>(2));
  CHECK(v.cause_summary == "same width bug");

  CHECK_FALSE(parse_inspector_verdict("IS_LOOP: no\nCAUSE_SUMMARY: different").is_loop);
  CHECK_FALSE(parse_inspector_verdict("IS_LOOP: yes\nCAUSE_SUMMARY: x").is_loop);
  CHECK_FALSE(parse_inspector_verdict("IS_LOOP: yes\nIS_LOOP: no\nMATCHED_ITERATION: 1").is_loop);
  CHECK_FALSE(parse_inspector_verdict("IS_LOOP: yes\nMATCHED_ITERATION: 1\nMATCHED_ITERATION: 3").is_loop);
  CHECK_FALSE(parse_inspector_verdict("").is_loop);
  const auto no = parse_inspector_verdict("garbage");
  CHECK_FALSE(no.matched_prior_iteration.has_value());
}
