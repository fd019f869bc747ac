#include "chiselforge/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "chiselforge/serialization.hpp"

namespace chiselforge {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool is_infra_failure(Verdict v) { return v == Verdict::ToolTimeout || v == Verdict::ProviderError; }

}  // namespace

CaseSpec load_case(const fs::path& dir) {
  const std::string id = dir.filename().string();
  auto fail = [&](const std::string& why) { throw CaseLoadError("case " + id + ": " + why); };
  for (const char* required : {"spec.md", "tb.v", "manifest.json"}) {
    if (!fs::is_regular_file(dir / required)) fail(std::string("missing ") + required);
  }
  CaseSpec spec;
  spec.case_id = id;
  spec.spec_text = read_file(dir / "spec.md");
  spec.testbench_src = read_file(dir / "tb.v");
  if (fs::is_regular_file(dir / "ref.v")) spec.reference_src = read_file(dir / "ref.v");
  if (spec.testbench_src.find_first_not_of(" \t\r\n") == std::string::npos) fail("tb.v is empty");
  if (spec.spec_text.find_first_not_of(" \t\r\n") == std::string::npos) fail("spec.md is empty");

  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  if (!m.is_object() || !m.contains("module_name") || !m["module_name"].is_string() ||
      m["module_name"].get<std::string>().empty()) {
    fail("manifest.json needs a nonempty string module_name");
  }
  spec.module_name = m["module_name"];
  spec.origin = m.value("origin", std::string("unknown"));
  if (m.contains("seed") && !m["seed"].is_null()) {
    if (!m["seed"].is_number_integer()) fail("manifest seed must be an integer");
    spec.seed = m["seed"].get<long>();
  }
  if (m.contains("excluded") && !m["excluded"].is_null()) {
    const auto& ex = m["excluded"];
    if (!ex.is_object() || !ex.contains("rule") || !ex["rule"].is_string()) {
      fail("manifest excluded must be an object with a rule");
    }
    const std::string rule = ex["rule"];
    if (!exclusion_rules().count(rule)) fail("unknown exclusion rule " + rule);
    const std::string reason = ex.value("reason", std::string());
    spec.excluded = reason.empty() ? rule : rule + ": " + reason;
  }
  return spec;
}

std::vector<CaseSpec> load_cases(const fs::path& root) {
  if (!fs::is_directory(root)) throw CaseLoadError("suite root " + root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind('.', 0) != 0) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<CaseSpec> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_case(d));
  return out;
}

void to_json(nlohmann::json& j, const CaseOutcome& o) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (auto v : o.attempt_verdicts) verdicts.push_back(std::string(to_string(v)));
  j = {{"case_id", o.case_id},
       {"trial", o.trial},
       {"final_verdict", std::string(to_string(o.final_verdict))},
       {"iterations_used", o.iterations_used},
       {"trace", o.trace},
       {"escapes_triggered", o.escapes_triggered},
       {"llm_calls", {{"generator", o.llm_calls.generator}, {"reviewer", o.llm_calls.reviewer}, {"inspector", o.llm_calls.inspector}}},
       {"timing",
        {{"generate_s", o.timing.generate_s},
         {"compile_s", o.timing.compile_s},
         {"simulate_s", o.timing.simulate_s},
         {"review_s", o.timing.review_s},
         {"inspect_s", o.timing.inspect_s}}},
       {"usage", {{"prompt_tokens", o.usage.prompt_tokens}, {"completion_tokens", o.usage.completion_tokens}}},
       {"attempt_verdicts", verdicts},
       {"last_error_kind", o.last_error_kind ? nlohmann::json(std::string(to_string(*o.last_error_kind))) : nlohmann::json()},
       {"error_message", o.error_message}};
}

void from_json(const nlohmann::json& j, CaseOutcome& o) {
  o.case_id = j.at("case_id").get<std::string>();
  o.trial = j.at("trial").get<int>();
  o.final_verdict = verdict_from_string(j.at("final_verdict").get<std::string>());
  o.iterations_used = j.at("iterations_used").get<int>();
  o.trace = j.at("trace").get<Trace>();
  o.escapes_triggered = j.at("escapes_triggered").get<int>();
  const auto& c = j.at("llm_calls");
  o.llm_calls = {c.at("generator").get<int>(), c.at("reviewer").get<int>(), c.at("inspector").get<int>()};
  const auto& t = j.at("timing");
  o.timing = {t.at("generate_s").get<double>(), t.at("compile_s").get<double>(), t.at("simulate_s").get<double>(),
              t.at("review_s").get<double>(), t.at("inspect_s").get<double>()};
  const auto& u = j.at("usage");
  o.usage = {u.at("prompt_tokens").get<long>(), u.at("completion_tokens").get<long>()};
  o.attempt_verdicts.clear();
  for (const auto& v : j.at("attempt_verdicts")) o.attempt_verdicts.push_back(verdict_from_string(v.get<std::string>()));
  const auto& l = j.at("last_error_kind");
  o.last_error_kind = l.is_null() ? std::nullopt : std::optional<Verdict>(verdict_from_string(l.get<std::string>()));
  o.error_message = j.at("error_message").get<std::string>();
}

LogContents read_results(const fs::path& path) {
  LogContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema").get<int>() != kResultsSchemaVersion) throw std::runtime_error("schema");
      const std::string kind = j.at("kind");
      if (kind == "outcome") {
        out.outcomes.push_back({j.at("config").get<RunConfig>(), j.at("outcome").get<CaseOutcome>()});
      } else if (kind == "abort") {
        out.aborts.push_back({j.at("case_id").get<std::string>(), j.at("config").at("model_id").get<std::string>(),
                              j.at("reason").get<std::string>()});
      } else {
        throw std::runtime_error("kind");
      }
    } catch (const std::exception&) {
      ++out.skipped_lines;
    }
  }
  return out;
}

ResultsLog::ResultsLog(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  if (!fs::exists(path_)) {
    std::ofstream(path_, std::ios::binary);
    return;
  }
  const std::string content = read_file(path_);
  if (!content.empty() && content.back() != '\n') {
    const auto last = content.rfind('\n');
    fs::resize_file(path_, last == std::string::npos ? 0 : last + 1);
  }
}

std::set<std::pair<std::string, int>> ResultsLog::completed(const std::string& model_id) const {
  std::set<std::pair<std::string, int>> done;
  for (const auto& e : read_results(path_).outcomes) {
    if (e.config.model_id == model_id) done.emplace(e.outcome.case_id, e.outcome.trial);
  }
  return done;
}

void ResultsLog::append_line(const std::string& line) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to results log " + path_.string());
}

void ResultsLog::append_outcome(const RunConfig& cfg, const CaseOutcome& outcome) {
  nlohmann::json j{{"schema", kResultsSchemaVersion}, {"kind", "outcome"}, {"config", cfg}, {"outcome", outcome}};
  append_line(j.dump());
}

void ResultsLog::append_abort(const RunConfig& cfg, const std::string& case_id, const std::string& reason) {
  nlohmann::json j{{"schema", kResultsSchemaVersion}, {"kind", "abort"}, {"config", cfg},
                   {"case_id", case_id},              {"reason", reason}};
  append_line(j.dump());
}

BenchResult run_bench(const std::vector<CaseSpec>& cases, const RunConfig& cfg, const TrialRunner& runner,
                      const BenchOptions& options) {
  cfg.validate();
  std::vector<const CaseSpec*> active;
  std::set<std::string> ids;
  for (const auto& c : cases) {
    if (!ids.insert(c.case_id).second) throw PreconditionError("duplicate case id " + c.case_id);
    if (!c.excluded) active.push_back(&c);
  }
  if (active.empty()) throw PreconditionError("no runnable cases after exclusion");
  if (!options.resume && fs::exists(options.results_log) && fs::file_size(options.results_log) > 0) {
    throw PreconditionError("results log " + options.results_log.string() + " exists; pass resume to continue it");
  }

  BenchResult result;
  result.config = cfg;
  result.started_at = utc_now();
  ResultsLog log(options.results_log);
  const auto done = log.completed(cfg.model_id);

  std::vector<std::pair<const CaseSpec*, int>> work;
  for (const auto* c : active) {
    for (int t = 0; t < cfg.trials; ++t) {
      if (!done.count({c->case_id, t})) work.emplace_back(c, t);
    }
  }

  // Single writer: workers hand finished outcomes to this queue.
  std::mutex mu;
  std::condition_variable cv;
  std::deque<CaseOutcome> pending;
  bool workers_done = false;
  std::string abort_reason;
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> next{0};
  int consecutive_infra = 0;
  int completed_count = 0;

  std::thread writer([&] {
    std::unique_lock lock(mu);
    while (true) {
      cv.wait(lock, [&] { return !pending.empty() || workers_done; });
      if (pending.empty() && workers_done) return;
      CaseOutcome o = std::move(pending.front());
      pending.pop_front();
      lock.unlock();
      log.append_outcome(cfg, o);
      lock.lock();
      ++completed_count;
      if (options.progress) options.progress(o, completed_count, static_cast<int>(work.size()));
    }
  });

  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= work.size()) return;
      CaseOutcome o;
      try {
        o = runner(*work[i].first, work[i].second);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (abort_reason.empty()) abort_reason = e.what();
        stop = true;
        return;
      }
      std::lock_guard lock(mu);
      consecutive_infra = is_infra_failure(o.final_verdict) ? consecutive_infra + 1 : 0;
      if (options.abort_after_infra_failures > 0 && consecutive_infra >= options.abort_after_infra_failures) {
        if (abort_reason.empty()) {
          abort_reason = std::to_string(consecutive_infra) + " consecutive infrastructure failures; last: " +
                         o.error_message;
        }
        stop = true;
      }
      pending.push_back(std::move(o));
      cv.notify_one();
    }
  };

  const int threads = std::max(1, std::min<int>(cfg.parallelism, static_cast<int>(work.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  {
    std::lock_guard lock(mu);
    workers_done = true;
  }
  cv.notify_one();
  writer.join();

  for (const auto& e : read_results(options.results_log).outcomes) {
    if (e.config.model_id != cfg.model_id || !ids.count(e.outcome.case_id)) continue;
    result.per_case[e.outcome.case_id].push_back(e.outcome);
  }
  for (auto& [id, outcomes] : result.per_case) {
    std::sort(outcomes.begin(), outcomes.end(), [](const CaseOutcome& a, const CaseOutcome& b) { return a.trial < b.trial; });
    for (const auto& o : outcomes) {
      result.usage.prompt_tokens += o.usage.prompt_tokens;
      result.usage.completion_tokens += o.usage.completion_tokens;
    }
  }
  if (!abort_reason.empty()) {
    for (const auto* c : active) {
      const auto it = result.per_case.find(c->case_id);
      if (it == result.per_case.end() || static_cast<int>(it->second.size()) < cfg.trials) {
        log.append_abort(cfg, c->case_id, abort_reason);
        result.aborted[c->case_id] = abort_reason;
      }
    }
  }
  result.finished_at = utc_now();
  return result;
}

std::map<std::string, BenchResult> results_by_model(const LogContents& log) {
  std::map<std::string, BenchResult> out;
  std::map<std::string, std::map<std::pair<std::string, int>, CaseOutcome>> seen;
  for (const auto& e : log.outcomes) {
    auto& r = out[e.config.model_id];
    r.config = e.config;
    seen[e.config.model_id][{e.outcome.case_id, e.outcome.trial}] = e.outcome;  // later lines win
  }
  for (auto& [model, outcomes] : seen) {
    auto& r = out[model];
    for (auto& [key, o] : outcomes) {
      r.usage.prompt_tokens += o.usage.prompt_tokens;
      r.usage.completion_tokens += o.usage.completion_tokens;
      r.per_case[key.first].push_back(std::move(o));
    }
  }
  for (const auto& a : log.aborts) {
    auto it = out.find(a.model_id);
    if (it == out.end()) continue;
    const auto c = it->second.per_case.find(a.case_id);
    const int have = c == it->second.per_case.end() ? 0 : static_cast<int>(c->second.size());
    if (have < it->second.config.trials) it->second.aborted[a.case_id] = a.reason;  // stale after a resume otherwise
  }
  return out;
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    throw PreconditionError("pass_at_k requires 0 <= c <= n and 1 <= k <= n (n=" + std::to_string(n) +
                            ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
  }
  if (c == 0) return 0.0;
  if (n - c < k) return 1.0;

  // Exact integer form: (C(n,k) - C(n-c,k)) / C(n,k), one rounding.
  using u128 = unsigned __int128;
  auto binom = [](int a, int b, u128& out) {
    b = std::min(b, a - b);
    u128 r = 1;
    for (int i = 1; i <= b; ++i) {
      u128 next;
      if (__builtin_mul_overflow(r, static_cast<u128>(a - b + i), &next)) return false;
      r = next / static_cast<u128>(i);
    }
    out = r;
    return true;
  };
  constexpr u128 kExact = u128(1) << 53;
  u128 total = 0, miss = 0;
  if (binom(n, k, total) && binom(n - c, k, miss) && total <= kExact) {
    return static_cast<double>(total - miss) / static_cast<double>(total);
  }
  // Product form: C(n-c,k)/C(n,k) = prod_{i=n-c+1}^{n} (1 - k/i).
  double prod = 1.0;
  for (int i = n - c + 1; i <= n; ++i) prod *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - prod;
}

double suite_pass_at_k(const BenchResult& result, int k, int cap) {
  double sum = 0;
  int counted = 0;
  for (const auto& [id, outcomes] : result.per_case) {
    const int n = static_cast<int>(outcomes.size());
    if (n < k) continue;
    const int c = static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(), [&](const CaseOutcome& o) {
      return o.final_verdict == Verdict::Success && o.iterations_used <= cap;
    }));
    sum += pass_at_k(n, c, k);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / counted;
}

std::map<int, std::vector<double>> success_vs_iterations(const BenchResult& result) {
  std::map<int, std::vector<double>> curve;
  for (int k : result.config.k_values) {
    if (curve.count(k)) continue;
    auto& row = curve[k];
    for (int cap = 0; cap <= result.config.max_iterations; ++cap) row.push_back(suite_pass_at_k(result, k, cap));
  }
  return curve;
}

std::vector<ErrorMixRow> error_mix_by_iteration(const BenchResult& result) {
  std::vector<std::array<int, 4>> counts;  // syntax, functional, success, exhausted
  for (const auto& [id, outcomes] : result.per_case) {
    for (const auto& o : outcomes) {
      const auto& v = o.attempt_verdicts;
      if (counts.size() < v.size()) counts.resize(v.size(), {0, 0, 0, 0});
      for (std::size_t i = 0; i < v.size(); ++i) {
        int bucket = 3;
        const bool last = i + 1 == v.size();
        if (!(last && o.final_verdict != Verdict::Success)) {
          switch (v[i]) {
            case Verdict::SyntaxError: bucket = 0; break;
            case Verdict::FunctionalError: bucket = 1; break;
            case Verdict::Success: bucket = 2; break;
            default: bucket = 3; break;
          }
        }
        ++counts[i][bucket];
      }
    }
  }
  std::vector<ErrorMixRow> rows;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& c = counts[i];
    const int active = c[0] + c[1] + c[2] + c[3];
    const double a = active;
    rows.push_back({static_cast<int>(i), active, c[0] / a, c[1] / a, c[2] / a, c[3] / a});
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

std::string model_label(const std::string& m) { return m.empty() ? "unnamed" : m; }

}  // namespace

void write_pass_at_k_table(std::ostream& out, const std::map<std::string, BenchResult>& results, char d) {
  std::set<int> ks;
  for (const auto& [m, r] : results) ks.insert(r.config.k_values.begin(), r.config.k_values.end());
  out << "model" << d << "cases" << d << "trials" << d << "max_iterations";
  for (int k : ks) out << d << "pass@" << k;
  out << '\n';
  for (const auto& [m, r] : results) {
    out << model_label(m) << d << r.per_case.size() << d << r.config.trials << d << r.config.max_iterations;
    for (int k : ks) {
      out << d;
      if (std::find(r.config.k_values.begin(), r.config.k_values.end(), k) != r.config.k_values.end()) {
        out << fmt(suite_pass_at_k(r, k, r.config.max_iterations));
      }
    }
    out << '\n';
  }
}

void write_success_curve(std::ostream& out, const std::map<std::string, BenchResult>& results, char d) {
  out << "model" << d << "k" << d << "max_iterations" << d << "success_rate\n";
  for (const auto& [m, r] : results) {
    for (const auto& [k, row] : success_vs_iterations(r)) {
      for (std::size_t cap = 0; cap < row.size(); ++cap) {
        out << model_label(m) << d << k << d << cap << d << fmt(row[cap]) << '\n';
      }
    }
  }
}

void write_error_mix(std::ostream& out, const std::map<std::string, BenchResult>& results, char d) {
  out << "model" << d << "iteration" << d << "active" << d << "syntax" << d << "functional" << d << "success" << d
      << "exhausted\n";
  for (const auto& [m, r] : results) {
    for (const auto& row : error_mix_by_iteration(r)) {
      out << model_label(m) << d << row.iteration << d << row.active << d << fmt(row.syntax) << d
          << fmt(row.functional) << d << fmt(row.success) << d << fmt(row.exhausted) << '\n';
    }
  }
}

}  // namespace chiselforge
