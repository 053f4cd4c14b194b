#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlsql/gateway.hpp"
#include "nlsql/pipeline.hpp"
#include "nlsql/question.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

struct BenchTask {
  std::string question_id;
  std::string question;
  std::string db_id;
  std::string gold_sql;
  std::optional<std::string> evidence_hint;

  friend bool operator==(const BenchTask&, const BenchTask&) = default;
};

/// Reads a benchmark dev file: a JSON array of {"question_id", "db_id",
/// "question", "evidence", "SQL"}. question_id defaults to the record index;
/// an empty evidence string means no hint. Throws LoadError naming the
/// record index of a malformed record.
std::vector<BenchTask> load_tasks(const std::filesystem::path& path);

/// Numbers compare with relative tolerance 1e-6 (integers and reals mix),
/// text and blobs exactly, NULL only with NULL.
bool values_equal(const Value& a, const Value& b);

/// 1 when the results match: element-wise when the gold query is ordered,
/// as multisets otherwise.
int compare_results(const std::vector<Row>& gold, const std::vector<Row>& pred, bool gold_has_order_by);

/// True when the outermost SELECT has an ORDER BY clause.
bool has_top_level_order_by(const std::string& sql);

/// Times one execution. `run` executes the query once and returns its
/// measured runtime; the default timer just returns that.
using TrialTimer = std::function<std::chrono::nanoseconds(const std::function<std::chrono::nanoseconds()>& run)>;

std::chrono::nanoseconds default_timer(const std::function<std::chrono::nanoseconds()>& run);

/// One discarded warm-up, then the median of `trials` timed runs. Throws
/// ValidationError when trials < 1, MeasurementError when a run fails.
std::chrono::nanoseconds measure_runtime(const std::string& sql, const std::filesystem::path& db_file, int trials,
                                         const TrialTimer& timer = default_timer,
                                         const SandboxLimits& limits = {});

/// sqrt(e_gold / e_pred). Throws DomainError unless both are positive.
double relative_efficiency(std::chrono::nanoseconds e_gold, std::chrono::nanoseconds e_pred);

struct TaskResult {
  std::string question_id;
  std::optional<std::string> predicted_sql;
  int indicator = 0;
  std::chrono::nanoseconds e_gold{0};
  std::optional<std::chrono::nanoseconds> e_pred;
  std::optional<double> r_value;  // present iff indicator == 1
  Route route = Route::Failed;
  Money cost;
  PipelineOutcome outcome = PipelineOutcome::GenerationFailure;
  int fallback_attempts = 0;
  std::string error;

  friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

struct BenchReport {
  double ex = 0.0;
  double ves = 0.0;
  std::size_t n_tasks = 0;
  double local_fraction = 0.0;
  Money total_cost;
  Money avg_cost_per_query;
  std::optional<Money> avg_local_cost;     // over LocalOnly tasks
  std::optional<Money> avg_fallback_cost;  // over FallbackUsed tasks
  std::optional<Money> baseline_avg_cost;  // every recorded usage repriced at the baseline
  std::vector<TaskResult> per_task;
};

/// Eq. EX = sum(indicator)/n and VES = sum(indicator * r)/n, summed in a fixed
/// order so the report does not depend on the order of `results`. Average
/// cost is the ledger total over n. Throws ValidationError on no results.
BenchReport compute_report(const std::vector<TaskResult>& results, const CostLedger& ledger,
                           const std::optional<Pricing>& baseline = std::nullopt);

struct BenchmarkConfig {
  DatabaseRegistry registry;
  PipelineBackends backends;
  PipelineOptions options;
  int workers = 1;
  int trials = 5;
  TrialTimer timer = default_timer;
  std::optional<Pricing> baseline;
};

/// Runs every task through the pipeline on a pool of `workers` threads and
/// scores it against its gold query. Runtime measurements are serialized per
/// database. Per-task problems land in that TaskResult; only setup problems
/// (an unknown db_id) throw ConfigError. `ledger`, when given, receives
/// every charge.
BenchReport run_benchmark(const std::vector<BenchTask>& tasks, const BenchmarkConfig& config,
                          CostLedger* ledger = nullptr);

void write_report_json(const BenchReport& report, const std::filesystem::path& path);
void write_report_csv(const BenchReport& report, const std::filesystem::path& path);
/// Terminal table: tasks, EX %, VES %, local %, average cost per query.
std::string render_summary(const BenchReport& report);

}  // namespace nlsql
