// Operator entry point: generate, bench, report, doctor.
//
// Exit codes: 0 success, 1 model failure, 2 infrastructure failure (provider,
// toolchain, missing API key, unreadable case), 64 usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>

#include "CLI11.hpp"
#include "chiselforge/config.hpp"
#include "chiselforge/engine.hpp"
#include "chiselforge/harness.hpp"
#include "chiselforge/mock.hpp"
#include "chiselforge/process.hpp"
#include "chiselforge/serialization.hpp"

using namespace chiselforge;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitModelFailure = 1;
constexpr int kExitInfra = 2;
constexpr int kExitUsage = 64;

struct Flags {
  std::string config;
  std::string case_dir;
  std::string suite;
  std::string out;
  std::string results;
  std::optional<int> trials;
  std::optional<int> max_iters;
  std::vector<int> k;
  std::optional<int> parallelism;
  std::optional<long> seed;
  bool mock = false;
  bool resume = false;
  bool no_escape = false;
  bool ping = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AppConfig resolve_config(const Flags& f) {
  AppConfig c = f.config.empty() ? default_app_config() : load_app_config(f.config);
  if (f.trials) c.run.trials = *f.trials;
  if (f.max_iters) c.run.max_iterations = *f.max_iters;
  if (!f.k.empty()) c.run.k_values = f.k;
  if (f.parallelism) c.run.parallelism = *f.parallelism;
  if (f.seed) c.run.seed = *f.seed;
  if (f.no_escape) c.run.escape_enabled = false;
  if (f.mock) {
    c.run.model_id = "mock";
    c.provider.model_id = "mock";
    c.provider.api_key_env.clear();
    c.provider.backoff_initial_s = 0;
    c.provider.requests_per_minute = 0;
  }
  // A k larger than the trial count is a caller mistake; default k values are clipped instead.
  if (f.k.empty()) {
    std::vector<int> ks;
    for (int k : c.run.k_values) {
      if (k <= c.run.trials) ks.push_back(k);
    }
    if (ks.empty()) ks.push_back(1);
    c.run.k_values = ks;
  }
  try {
    c.run.validate();
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  return c;
}

/// Owns the per-trial objects an EngineDeps points into.
struct TrialKit {
  std::unique_ptr<ChatTransport> transport;
  std::unique_ptr<CompileAdapter> compiler;
  std::unique_ptr<SimAdapter> simulator;
  EngineDeps deps;
};

struct Shared {
  AppConfig cfg;
  std::optional<PromptLibrary> prompts;
  std::optional<ErrorCatalog> catalog;
  bool mock = false;
};

fs::path playlist_for(const Shared& s, const fs::path& case_dir) {
  if (!s.cfg.mock_playlist.empty()) return s.cfg.mock_playlist;
  if (fs::exists(case_dir / "mock.json")) return case_dir / "mock.json";
  if (fs::exists(case_dir.parent_path() / "mock.json")) return case_dir.parent_path() / "mock.json";
  throw std::runtime_error("mock mode needs a playlist: set mock_playlist or add mock.json to " + case_dir.string());
}

void check_api_key(const AppConfig& c) {
  if (c.provider.api_key_env.empty()) return;
  const char* v = std::getenv(c.provider.api_key_env.c_str());
  if (!v || !*v) throw MissingApiKey(c.provider.api_key_env);
}

TrialKit make_kit(const Shared& s, const fs::path& case_dir) {
  TrialKit kit;
  if (s.mock) {
    kit.transport = ScriptedTransport::from_file(playlist_for(s, case_dir));
    kit.compiler = std::make_unique<MockCompiler>();
    kit.simulator = std::make_unique<MockSimulator>();
  } else {
    kit.transport = std::make_unique<HttpTransport>();
    kit.compiler = std::make_unique<ToolchainCompiler>(s.cfg.compiler);
    kit.simulator = std::make_unique<ToolchainSimulator>(s.cfg.simulator);
  }
  kit.deps.gateway.provider = s.cfg.provider;
  kit.deps.gateway.transport = kit.transport.get();
  if (s.mock) kit.deps.gateway.sleeper = [](double) {};
  kit.deps.compiler = kit.compiler.get();
  kit.deps.simulator = kit.simulator.get();
  kit.deps.catalog = s.catalog ? &*s.catalog : &ErrorCatalog::builtin();
  kit.deps.prompts = s.prompts ? &*s.prompts : &PromptLibrary::builtin();
  kit.deps.limits = s.cfg.limits;
  return kit;
}

Shared make_shared_state(const Flags& f) {
  Shared s;
  s.cfg = resolve_config(f);
  s.mock = f.mock;
  if (!s.cfg.prompts_dir.empty()) s.prompts = PromptLibrary::load(s.cfg.prompts_dir);
  if (!s.cfg.catalog_path.empty()) s.catalog = ErrorCatalog::load(s.cfg.catalog_path);
  if (!s.mock) {
    check_api_key(s.cfg);
    s.cfg.provider.validate();
    // Fail before any trial starts when a toolchain is unusable.
    ToolchainCompiler probe_compiler(s.cfg.compiler);
    ToolchainSimulator probe_simulator(s.cfg.simulator);
  }
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

int exit_code_for(Verdict v) {
  switch (v) {
    case Verdict::Success:
      return kExitOk;
    case Verdict::ToolTimeout:
    case Verdict::ProviderError:
      return kExitInfra;
    default:
      return kExitModelFailure;
  }
}

int cmd_generate(const Flags& f) {
  if (f.case_dir.empty()) throw UsageError("generate needs --case");
  Shared s = make_shared_state(f);
  const CaseSpec spec = load_case(f.case_dir);
  if (spec.excluded) throw UsageError("case " + spec.case_id + " is excluded (" + *spec.excluded + ")");
  const fs::path out = f.out.empty() ? fs::path("out") / spec.case_id : fs::path(f.out);
  fs::create_directories(out);

  TrialKit kit = make_kit(s, f.case_dir);
  std::ofstream events(out / "events.jsonl", std::ios::binary);
  kit.deps.events = [&](const EngineEvent& e) { events << e.to_json().dump() << '\n'; };
  const CaseOutcome o = run_case(spec, s.cfg.run, kit.deps);

  if (!o.trace.records.empty()) {
    const auto& last = o.trace.records.back().candidate;
    write_text(out / (spec.module_name + ".scala"), last.chisel_src);
    if (last.verilog_src) write_text(out / (spec.module_name + ".v"), *last.verilog_src);
  }
  write_text(out / "trace.json", nlohmann::json(o.trace).dump(2) + "\n");
  write_text(out / "outcome.json", nlohmann::json(o).dump(2) + "\n");

  std::cout << spec.case_id << ": " << to_string(o.final_verdict) << " after " << o.iterations_used
            << " iteration(s), " << o.escapes_triggered << " escape(s)\n";
  if (!o.error_message.empty()) std::cerr << "error: " << o.error_message << "\n";
  std::cout << "artifacts in " << out.string() << "\n";
  return exit_code_for(o.final_verdict);
}

int cmd_bench(const Flags& f) {
  if (f.suite.empty()) throw UsageError("bench needs --suite");
  Shared s = make_shared_state(f);
  const auto cases = load_cases(f.suite);
  const fs::path out = f.out.empty() ? fs::path("out") / "bench" : fs::path(f.out);
  fs::create_directories(out);

  int excluded = 0;
  for (const auto& c : cases) excluded += c.excluded ? 1 : 0;
  std::cout << "suite " << f.suite << ": " << cases.size() << " cases, " << excluded << " excluded, "
            << s.cfg.run.trials << " trials, max_iterations " << s.cfg.run.max_iterations << "\n";

  const fs::path suite_root = f.suite;
  TrialRunner runner = [&](const CaseSpec& spec, int trial) {
    TrialKit kit = make_kit(s, suite_root / spec.case_id);
    return run_case(spec, s.cfg.run, kit.deps, trial);
  };
  std::mutex print_mu;
  BenchOptions opts;
  opts.results_log = out / "results.jsonl";
  opts.resume = f.resume;
  opts.abort_after_infra_failures = s.cfg.abort_after_infra_failures;
  opts.progress = [&](const CaseOutcome& o, int done, int total) {
    std::lock_guard lock(print_mu);
    std::cout << "[" << done << "/" << total << "] " << o.case_id << " trial " << o.trial << ": "
              << to_string(o.final_verdict) << " (" << o.iterations_used << " iterations)\n";
  };
  const BenchResult r = run_bench(cases, s.cfg.run, runner, opts);

  for (int k : s.cfg.run.k_values) {
    std::cout << "pass@" << k << " = " << suite_pass_at_k(r, k, s.cfg.run.max_iterations) << "\n";
  }
  std::cout << "results in " << opts.results_log.string() << "\n";
  if (!r.aborted.empty()) {
    std::cerr << "run aborted: " << r.aborted.begin()->second << "\n";
    return kExitInfra;
  }
  return kExitOk;
}

int cmd_report(const Flags& f) {
  if (f.results.empty()) throw UsageError("report needs a results log");
  if (!fs::exists(f.results)) throw UsageError("no results log at " + f.results);
  const LogContents log = read_results(f.results);
  if (log.skipped_lines > 0) std::cerr << "warning: skipped " << log.skipped_lines << " unreadable line(s)\n";
  const auto results = results_by_model(log);
  if (f.out.empty()) {
    std::cout << "# pass@k\n";
    write_pass_at_k_table(std::cout, results);
    std::cout << "\n# success vs iterations\n";
    write_success_curve(std::cout, results);
    std::cout << "\n# error mix\n";
    write_error_mix(std::cout, results);
    return kExitOk;
  }
  fs::create_directories(f.out);
  std::ofstream a(fs::path(f.out) / "pass_at_k.csv"), b(fs::path(f.out) / "success_curve.csv"),
      c(fs::path(f.out) / "error_mix.csv");
  write_pass_at_k_table(a, results);
  write_success_curve(b, results);
  write_error_mix(c, results);
  std::cout << "reports in " << f.out << "\n";
  return kExitOk;
}

int cmd_doctor(const Flags& f) {
  bool ok = true;
  auto report = [&](bool pass, const std::string& what, const std::string& detail = {}) {
    std::cout << (pass ? "ok    " : "FAIL  ") << what << (detail.empty() ? "" : ": " + detail) << "\n";
    ok = ok && pass;
  };
  AppConfig c;
  try {
    c = resolve_config(f);
    report(true, "config", f.config.empty() ? "defaults" : f.config);
  } catch (const std::exception& e) {
    report(false, "config", e.what());
    return kExitUsage;
  }
  try {
    if (c.prompts_dir.empty()) {
      report(true, "prompts", "version " + PromptLibrary::builtin().version());
    } else {
      report(true, "prompts", "version " + PromptLibrary::load(c.prompts_dir).version());
    }
    if (c.catalog_path.empty()) {
      report(true, "catalog", std::to_string(ErrorCatalog::builtin().entries().size()) + " classes");
    } else {
      report(true, "catalog", std::to_string(ErrorCatalog::load(c.catalog_path).entries().size()) + " classes");
    }
  } catch (const std::exception& e) {
    report(false, "data files", e.what());
  }
  if (f.mock) {
    report(true, "mock mode", "toolchain and provider checks skipped");
    return ok ? kExitOk : kExitInfra;
  }
  try {
    ToolchainCompiler compiler(c.compiler);
    std::string versions;
    for (const auto& [k, v] : compiler.contract().pinned_versions) versions += k + "=" + v + " ";
    report(true, "scaffold", versions);
    if (!compiler.contract().probe_command.empty()) {
      const auto r = run_shell(compiler.contract().probe_command, c.compiler.scaffold_dir, 600);
      report(r.exit_code == 0, "scaffold probe", r.timed_out ? "timed out" : "exit " + std::to_string(r.exit_code));
    }
  } catch (const std::exception& e) {
    report(false, "scaffold", e.what());
  }
  try {
    ToolchainSimulator sim(c.simulator);
    report(true, "simulator", c.simulator.compile_command);
  } catch (const std::exception& e) {
    report(false, "simulator", e.what());
  }
  try {
    c.provider.validate();
    check_api_key(c);
    report(true, "api key", c.provider.api_key_env.empty() ? "none required" : c.provider.api_key_env + " set");
    if (f.ping) {
      HttpTransport http;
      ProviderConfig p = c.provider;
      p.max_retries = 0;
      complete({{ChatRole::System, "Reply with OK."}, {ChatRole::User, "ping"}}, p, http);
      report(true, "provider", p.endpoint);
    }
  } catch (const std::exception& e) {
    report(false, "provider", e.what());
  }
  return ok ? kExitOk : kExitInfra;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chiselforge: LLM-driven Chisel generation with compile/simulate reflection"};
  app.require_subcommand(1, 1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_flag("--mock", f.mock, "scripted provider and fake toolchains; no network");
  };
  auto run_opts = [&](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "simulation seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--max-iters", f.max_iters, "revision cap n (0 = zero-shot)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-escape", f.no_escape, "disable loop detection and escape");
  };

  auto* gen = app.add_subcommand("generate", "run one case once");
  common(gen);
  run_opts(gen);
  gen->add_option("--case", f.case_dir, "case directory")->required()->check(CLI::ExistingDirectory);

  auto* bench = app.add_subcommand("bench", "run a suite and append outcomes to a results log");
  common(bench);
  run_opts(bench);
  bench->add_option("--suite", f.suite, "suite root")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--trials", f.trials, "trials per case")->check(CLI::PositiveNumber);
  bench->add_option("--k", f.k, "k values for Pass@k")->delimiter(',');
  bench->add_option("--parallelism", f.parallelism, "concurrent trials")->check(CLI::PositiveNumber);
  bench->add_flag("--resume", f.resume, "skip (case, trial) pairs already in the log");

  auto* rep = app.add_subcommand("report", "emit Pass@k, iteration curve and error-mix tables");
  rep->add_option("results", f.results, "results log")->required();
  rep->add_option("--out", f.out, "directory for CSV tables (default: stdout)");

  auto* doc = app.add_subcommand("doctor", "check config, toolchain pins and provider access");
  common(doc);
  doc->add_flag("--ping", f.ping, "send one request to the provider");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(f);
    if (*bench) return cmd_bench(f);
    if (*rep) return cmd_report(f);
    return cmd_doctor(f);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MissingApiKey& e) {
    std::cerr << "missing API key: environment variable " << e.variable() << " is not set\n";
    return kExitInfra;
  } catch (const ToolchainError& e) {
    std::cerr << "toolchain unavailable: " << e.what() << "\n";
    return kExitInfra;
  } catch (const CaseLoadError& e) {
    std::cerr << "malformed case: " << e.what() << "\n";
    return kExitInfra;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfra;
  }
}
