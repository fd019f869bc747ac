#include "doctest.h"
#include "chiselforge/compile_adapter.hpp"
#include "chiselforge/process.hpp"
#include "support.hpp"

#include <cstdlib>

using namespace chiselforge;
namespace fs = std::filesystem;

namespace {

const fs::path kScaffold = CHISELFORGE_SCAFFOLD;

/// Puts the stand-in JVM first on PATH for the lifetime of the object.
struct FakeJvmOnPath {
  std::string saved = std::getenv("PATH") ? std::getenv("PATH") : "";
  FakeJvmOnPath() { ::setenv("PATH", ((cftest::fixtures() / "fake_jvm").string() + ":" + saved).c_str(), 1); }
  ~FakeJvmOnPath() { ::setenv("PATH", saved.c_str(), 1); }
};

CaseSpec top_case(const std::string& name) {
  auto c = cftest::adder_case();
  c.module_name = name;
  return c;
}

Candidate candidate(std::string src) { return {0, std::move(src), std::nullopt, Provenance::InitialGeneration}; }

}  // namespace

TEST_CASE("bundled scaffold contract is valid and pinned") {
  const auto c = ScaffoldContract::load(kScaffold);
  CHECK(c.module_slot == "src/main/scala/Candidate.scala");
  CHECK(c.output_path == "generated/Top.v");
  CHECK(c.pinned_versions.at("chisel") == "6.5.0");
  CHECK(c.pinned_versions.at("firtool") == "1.62.0");
  CHECK(c.pinned_versions.at("scala") == "2.13.14");
  CHECK(fs::is_regular_file(kScaffold / c.module_slot));

  // versions.env must agree with the contract.
  const auto env = cftest::read_file(kScaffold / "versions.env");
  for (const auto& [tool, version] : c.pinned_versions) {
    std::string key = tool;
    for (auto& ch : key) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    CHECK(env.find(key + "_VERSION=" + version + "\n") != std::string::npos);
  }
}

TEST_CASE("probe reports a scaffold without fetched dependencies") {
  if (fs::exists(kScaffold / "lib")) return;
  const auto r = run_shell(ScaffoldContract::load(kScaffold).probe_command, kScaffold, 30);
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("run setup.sh") != std::string::npos);
}

TEST_CASE("entry point honours the subprocess contract") {
  FakeJvmOnPath jvm;
  cftest::TempDir d;
  ToolchainCompilerOptions o;
  o.scaffold_dir = kScaffold;
  o.workspace_root = d / "ws";
  ToolchainCompiler compiler(o);

  SUBCASE("good module emits Verilog at the output path") {
    const auto r = compiler.compile_candidate(
        candidate(cftest::read_file(cftest::fixtures() / "real" / "Adder.scala")), top_case("Adder"), 30);
    CAPTURE(r.raw_log);
    REQUIRE(r.status == CompileStatus::Ok);
    CHECK(r.verilog_src.find("module Adder") != std::string::npos);
  }
  SUBCASE("scalac errors are parsed with the slot location") {
    const auto r = compiler.compile_candidate(candidate("class Top {\n  io.out := sgnal\n}\n"), top_case("Top"), 30);
    REQUIRE(r.status == CompileStatus::Failed);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].catalog_class == "A1");
    REQUIRE(r.entries[0].location);
    CHECK(r.entries[0].location->file == "src/main/scala/Candidate.scala");
  }
  SUBCASE("elaboration failures exit nonzero without output") {
    const auto r = compiler.compile_candidate(
        candidate(cftest::read_file(cftest::fixtures() / "real" / "B3.scala")), top_case("Adder"), 30);
    REQUIRE(r.status == CompileStatus::Failed);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].catalog_class == "B3");
    CHECK(r.raw_log.find("not fully initialized") != std::string::npos);
  }
  CHECK(fs::is_empty(d / "ws"));
}
