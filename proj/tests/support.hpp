#pragma once
// Shared test scaffolding: temp dirs, scripted runs, random generators.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chiselforge/engine.hpp"
#include "chiselforge/mock.hpp"
#include "json.hpp"

namespace cftest {

namespace fs = std::filesystem;
using namespace chiselforge;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "cftest-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline fs::path fixtures() { return CHISELFORGE_FIXTURES; }

inline CaseSpec adder_case(const std::string& id = "adder") {
  CaseSpec c;
  c.case_id = id;
  c.spec_text = "Module Adder: inputs a[7:0], b[7:0]; output sum[8:0] = a + b.";
  c.testbench_src = "module tb; Adder dut(); endmodule\n";
  c.module_name = "Adder";
  c.origin = "test";
  return c;
}

/// Generator reply: a fenced Chisel module carrying mock directives.
inline std::string chisel_reply(const std::vector<std::string>& directives, const std::string& tag = "") {
  std::string src = "```scala\nimport chisel3._\n\nclass Adder extends Module {\n";
  for (const auto& d : directives) src += "  // " + d + "\n";
  if (!tag.empty()) src += "  // " + tag + "\n";
  src += "  val io = IO(new Bundle {})\n}\n```";
  return "Here is the module.\n" + src + "\n";
}

inline const std::string kReviewerReply =
    "ITEM 1\nLOCATION: io.sum assignment\nCAUSE: the expression uses the wrong operand\n"
    "SOLUTION: assign io.sum := io.a +& io.b\n";

inline const std::string kInspectorYes =
    "IS_LOOP: yes\nMATCHED_ITERATION: 0\nCAUSE_SUMMARY: w is assigned only inside a when branch\n";
inline const std::string kInspectorNo = "IS_LOOP: no\nCAUSE_SUMMARY: different causes\n";

/// Owns a mock provider and fake toolchains and exposes EngineDeps over them.
struct MockRig {
  explicit MockRig(nlohmann::json playlist) : transport(std::move(playlist)) {
    deps.gateway.provider.endpoint = "http://mock.invalid/v1/chat/completions";
    deps.gateway.provider.model_id = "mock";
    deps.gateway.provider.backoff_initial_s = 0;
    deps.gateway.transport = &transport;
    deps.gateway.sleeper = [](double) {};
    deps.compiler = &compiler;
    deps.simulator = &simulator;
    deps.clock = [] { return 0.0; };
  }
  MockRig(const MockRig&) = delete;

  ScriptedTransport transport;
  MockCompiler compiler;
  MockSimulator simulator;
  EngineDeps deps;
};

inline RunConfig mock_run_config(int max_iterations = 10, bool escape = true) {
  RunConfig c;
  c.max_iterations = max_iterations;
  c.trials = 1;
  c.k_values = {1};
  c.model_id = "mock";
  c.escape_enabled = escape;
  return c;
}

/// Three-stage repair: misspelling, type mismatch, functional mismatch, pass.
inline nlohmann::json three_stage_playlist() {
  return {{"generator",
           {chisel_reply({"mock-compile: Adder.scala:12:3: Value sgnal is not a member. Did you mean signal?"}),
            chisel_reply({"mock-compile: Adder.scala:15:20: type mismatch;",
                          "mock-compile:  found   : chisel3.Bool", "mock-compile:  required: chisel3.UInt"}),
            chisel_reply({"mock-sim: CHECK 0 IN=a=1,b=1 EXP=sum=2 GOT=sum=2 PASS",
                          "mock-sim: CHECK 1 IN=a=3,b=4 EXP=sum=7 GOT=sum=1 FAIL"}),
            chisel_reply({})}},
          {"reviewer", {kReviewerReply}},
          {"inspector", {kInspectorNo}}};
}

/// Generator repeating one uninitialized-wire error forever.
inline nlohmann::json repeating_b3_playlist(bool inspector_affirms = true) {
  return {{"generator", {chisel_reply({"mock-compile: Top.scala:14:5: Reference w not fully initialized."})}},
          {"reviewer", {kReviewerReply}},
          {"inspector", {inspector_affirms ? kInspectorYes : kInspectorNo}}};
}

/// Deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
  }
  std::string identifier() {
    static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    std::string s(1, letters[static_cast<std::size_t>(integer(0, 25))]);
    const int n = integer(0, 7);
    for (int i = 0; i < n; ++i) s += "abcdefghijklmnopqrstuvwxyz0123456789_"[integer(0, 36)];
    return s;
  }
  std::string text(int max_len) {
    static const std::string chars = "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJ0123456789.,:;()[]{}<>=+-*/_'\"\n\t#@!?";
    std::string s;
    const int n = integer(0, max_len);
    for (int i = 0; i < n; ++i) s += chars[static_cast<std::size_t>(integer(0, static_cast<int>(chars.size()) - 1))];
    return s;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace cftest
