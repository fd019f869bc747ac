#include "doctest.h"
#include "chiselforge/sim_adapter.hpp"
#include "support.hpp"

using namespace chiselforge;
namespace fs = std::filesystem;

namespace {

const std::string kDut = "module Adder(input [7:0] a, b, output [8:0] sum);\n  assign sum = a + b;\nendmodule\n";

// The fake simulator executes the testbench as a shell script.
CaseSpec scripted_case(const std::string& script) {
  auto c = cftest::adder_case();
  c.testbench_src = script;
  return c;
}

SimulatorConfig fake_sim(const fs::path& root) {
  SimulatorConfig cfg;
  cfg.compile_command = "test -f dut.v";
  cfg.run_command = "sh tb.v {seed}";
  cfg.workspace_root = root;
  return cfg;
}

}  // namespace

TEST_CASE("per-check lines") {
  const auto s = parse_mismatches(
      "CHECK t0 IN=a=1,b=2 EXP=3 GOT=3 PASS\n"
      "CHECK t1 IN=a=255,b=1 EXP=256 GOT=0 FAIL\n"
      "CHECK t2 IN=a=0,b=0 EXP=0 GOT=0 PASS\r\n");
  CHECK(s.recognized);
  CHECK(s.total_count == 3);
  CHECK(s.failed_count == 1);
  REQUIRE(s.entries.size() == 1);
  CHECK(s.entries[0] == MismatchEntry{"t1", "a=255,b=1", "256", "0", std::nullopt});
}

TEST_CASE("entry list is capped but counts are not") {
  std::string log;
  for (int i = 0; i < 40; ++i) log += "CHECK t" + std::to_string(i) + " IN=x EXP=1 GOT=0 FAIL\n";
  const auto s = parse_mismatches(log, 5);
  CHECK(s.entries.size() == 5);
  CHECK(s.failed_count == 40);
  CHECK(s.entries.back().testpoint_id == "t4");
}

TEST_CASE("summary dialects") {
  auto s = parse_mismatches("Hint: Output 'q' has 12 mismatches. First mismatch occurred at time 130.\n"
                            "Hint: Output 'z' has 1 mismatch.\n"
                            "Mismatches: 13 in 200 samples\n");
  CHECK(s.recognized);
  CHECK(s.failed_count == 13);
  CHECK(s.total_count == 200);
  REQUIRE(s.entries.size() == 2);
  CHECK(s.entries[0].testpoint_id == "q");
  CHECK(s.entries[0].time == std::optional<double>(130));
  CHECK_FALSE(s.entries[1].time.has_value());

  s = parse_mismatches("Mismatches: 0 in 50 samples\n");
  CHECK(s.recognized);
  CHECK(s.failed_count == 0);
  CHECK(s.entries.empty());

  s = parse_mismatches("Test completed with 4 / 10 failures\n");
  CHECK(s.failed_count == 4);
  REQUIRE(s.entries.size() == 1);
  CHECK(s.entries[0].testpoint_id == "summary");

  s = parse_mismatches("=========== Your Design Passed ===========\n");
  CHECK(s.recognized);
  CHECK(s.failed_count == 0);

  s = parse_mismatches("random chatter\n");
  CHECK_FALSE(s.recognized);
}

TEST_CASE("unparsed failure placeholder") {
  const auto s = unparsed_failure("segfault in vvp\n", 139);
  CHECK(s.unparsed);
  REQUIRE(s.entries.size() == 1);
  CHECK(s.entries[0].testpoint_id == "unparsed");
  CHECK(s.entries[0].actual.find("139") != std::string::npos);
}

TEST_CASE("declared modules") {
  CHECK(declared_modules("module A(); endmodule\n// x\nmodule B_1 #(parameter W=1) (); endmodule") ==
        std::vector<std::string>{"A", "B_1"});
  CHECK(declared_modules("").empty());
}

TEST_CASE("assemble_sim writes two or three sources") {
  cftest::TempDir root;
  auto c = cftest::adder_case();
  auto ws = assemble_sim(kDut, c, root.path());
  CHECK(ws.sources == std::vector<fs::path>{"dut.v", "tb.v"});
  CHECK(cftest::read_file(ws.dir / "dut.v") == kDut);
  CHECK_FALSE(ws.build_error.has_value());

  c.reference_src = "module RefAdder(); endmodule\n";
  ws = assemble_sim(kDut, c, root.path());
  CHECK(ws.sources.size() == 3);
  CHECK(cftest::read_file(ws.dir / "ref.v") == *c.reference_src);

  ws = assemble_sim("module Other(); endmodule\n", c, root.path());
  REQUIRE(ws.build_error.has_value());
  CHECK(ws.build_error->find("'Adder'") != std::string::npos);
  CHECK(ws.build_error->find("Other") != std::string::npos);

  CHECK_THROWS_AS(assemble_sim("", c, root.path()), PreconditionError);
}

TEST_CASE("fake simulator outcomes") {
  cftest::TempDir root;
  const auto cfg = fake_sim(root.path());
  auto run = [&](const std::string& script, double timeout = 10) {
    return simulate(assemble_sim(kDut, scripted_case(script), root.path()), cfg, timeout, 42, "Adder");
  };

  auto r = run("echo \"CHECK t0 IN=s$1 EXP=1 GOT=1 PASS\"\n");
  CHECK(r.status == SimStatus::Pass);
  CHECK(r.total_count == 1);
  CHECK(r.raw_log.find("s42") != std::string::npos);

  r = run("echo 'CHECK t0 IN=x EXP=1 GOT=0 FAIL'\n");
  CHECK(r.status == SimStatus::Fail);
  CHECK(r.failed_count == 1);
  REQUIRE(r.mismatches.size() == 1);
  CHECK(r.mismatches[0].testpoint_id == "t0");

  r = run("echo nothing useful\n");
  CHECK(r.status == SimStatus::Fail);
  REQUIRE(r.mismatches.size() == 1);
  CHECK(r.mismatches[0].testpoint_id == "unparsed");

  r = run("echo 'CHECK t0 IN=x EXP=1 GOT=1 PASS'; exit 2\n");
  CHECK(r.status == SimStatus::Fail);

  r = run("sleep 30\n", 0.5);
  CHECK(r.status == SimStatus::Timeout);
  CHECK(r.wall_time_s < 5);
}

TEST_CASE("simulator build failures and DUT naming") {
  cftest::TempDir root;
  auto cfg = fake_sim(root.path());
  cfg.compile_command = "echo 'syntax error in dut.v'; exit 1";
  auto r = simulate(assemble_sim(kDut, cftest::adder_case(), root.path()), cfg, 10, 1);
  CHECK(r.status == SimStatus::BuildError);
  CHECK(r.raw_log.find("syntax error") != std::string::npos);

  cfg = fake_sim(root.path());
  r = simulate(assemble_sim("module Wrong(); endmodule", cftest::adder_case(), root.path()), cfg, 10, 1);
  CHECK(r.status == SimStatus::BuildError);
}

TEST_CASE("toolchain simulator checks its programs and cleans up") {
  cftest::TempDir root;
  SimulatorConfig cfg = fake_sim(root.path());
  cfg.run_command = "no-such-simulator-xyz run";
  CHECK_THROWS_AS(ToolchainSimulator{cfg}, ToolchainError);

  cfg = fake_sim(root / "ws");
  ToolchainSimulator sim(cfg);
  auto c = scripted_case("echo 'Mismatches: 0 in 8 samples'\n");
  c.seed = 7;
  const auto r = sim.simulate_candidate(kDut, c, 10, 99);
  CHECK(r.status == SimStatus::Pass);
  CHECK(r.total_count == 8);
  CHECK(fs::is_empty(root / "ws"));
}
