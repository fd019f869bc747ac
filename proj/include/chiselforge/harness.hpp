#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chiselforge/domain.hpp"
#include "chiselforge/engine.hpp"
#include "json.hpp"

namespace chiselforge {

/// A case directory could not be read. The message names the case.
class CaseLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest exclusion rules.
inline const std::set<std::string>& exclusion_rules() {
  static const std::set<std::string> rules{"needs-parameterization", "no-reference", "debug-or-completion"};
  return rules;
}

/// Reads one case from `<dir>/{spec.md, tb.v, ref.v?, manifest.json}`.
CaseSpec load_case(const std::filesystem::path& dir);

/// Every case directory under `root`, sorted by case id. Excluded cases are
/// returned with their reason set, never dropped.
std::vector<CaseSpec> load_cases(const std::filesystem::path& root);

void to_json(nlohmann::json& j, const CaseOutcome& o);
void from_json(const nlohmann::json& j, CaseOutcome& o);

inline constexpr int kResultsSchemaVersion = 1;

/// Contents of a results log. Unparseable lines are counted, not fatal.
struct LogContents {
  struct Entry {
    RunConfig config;
    CaseOutcome outcome;
  };
  struct Abort {
    std::string case_id;
    std::string model_id;
    std::string reason;
  };
  std::vector<Entry> outcomes;
  std::vector<Abort> aborts;
  int skipped_lines = 0;
};

LogContents read_results(const std::filesystem::path& path);

/// Append-only line-delimited results file. Opening drops a torn final line
/// left by an interrupted writer.
class ResultsLog {
 public:
  explicit ResultsLog(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  /// (case_id, trial) pairs already persisted for `model_id`.
  std::set<std::pair<std::string, int>> completed(const std::string& model_id) const;
  void append_outcome(const RunConfig& cfg, const CaseOutcome& outcome);
  void append_abort(const RunConfig& cfg, const std::string& case_id, const std::string& reason);

 private:
  void append_line(const std::string& line);
  std::filesystem::path path_;
};

struct BenchResult {
  RunConfig config;
  std::map<std::string, std::vector<CaseOutcome>> per_case;  // sorted by trial
  std::map<std::string, std::string> aborted;                 // case_id -> reason
  std::string started_at;
  std::string finished_at;
  Usage usage;
};

using TrialRunner = std::function<CaseOutcome(const CaseSpec& spec, int trial)>;

struct BenchOptions {
  std::filesystem::path results_log;
  /// Skip (case, trial) pairs already in the log. Without it an existing
  /// log is refused.
  bool resume = false;
  /// Consecutive ToolTimeout / ProviderError outcomes that abort the run.
  int abort_after_infra_failures = 5;
  std::function<void(const CaseOutcome&, int done, int total)> progress;
};

/// Runs cfg.trials trials of every non-excluded case over cfg.parallelism
/// workers. Outcomes are persisted as they complete by a single writer.
/// The result holds every outcome in the log for this model, resumed ones
/// included.
BenchResult run_bench(const std::vector<CaseSpec>& cases, const RunConfig& cfg, const TrialRunner& runner,
                      const BenchOptions& options);

/// One BenchResult per model id found in a log.
std::map<std::string, BenchResult> results_by_model(const LogContents& log);

/// Probability that at least one of k draws without replacement from n
/// trials with c successes is a success: 1 - C(n-c, k) / C(n, k).
double pass_at_k(int n, int c, int k);

/// Mean over cases of pass_at_k. Cases with fewer than k outcomes are left
/// out; with none left the value is 0.
double suite_pass_at_k(const BenchResult& result, int k, int cap);

/// k -> success rate for each hypothetical cap 0..max_iterations, counting a
/// trial as successful when it succeeded within that many iterations.
std::map<int, std::vector<double>> success_vs_iterations(const BenchResult& result);

struct ErrorMixRow {
  int iteration = 0;
  int active = 0;
  double syntax = 0;
  double functional = 0;
  double success = 0;
  double exhausted = 0;
};

/// Verdict shares per attempt index over the trials that reached it. A
/// trial's last attempt counts as exhausted when the trial ended without
/// success.
std::vector<ErrorMixRow> error_mix_by_iteration(const BenchResult& result);

void write_pass_at_k_table(std::ostream& out, const std::map<std::string, BenchResult>& results, char delim = ',');
void write_success_curve(std::ostream& out, const std::map<std::string, BenchResult>& results, char delim = ',');
void write_error_mix(std::ostream& out, const std::map<std::string, BenchResult>& results, char delim = ',');

}  // namespace chiselforge
