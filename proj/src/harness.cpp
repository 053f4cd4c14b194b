#include "nlsql/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "nlsql/errors.hpp"
#include "nlsql/sql.hpp"

namespace nlsql {

using json = nlohmann::json;
using std::chrono::nanoseconds;

namespace {

std::string field_string(const json& record, const char* key, std::size_t index, bool required) {
  const auto it = record.find(key);
  if (it == record.end() || it->is_null()) {
    if (required) throw LoadError("record " + std::to_string(index) + ": missing field \"" + key + "\"");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw LoadError("record " + std::to_string(index) + ": field \"" + key + "\" must be a string");
}

}  // namespace

std::vector<BenchTask> load_tasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open task file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError("task file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw LoadError("task file " + path.string() + " must hold a JSON array");
  std::vector<BenchTask> tasks;
  tasks.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& record = doc[i];
    if (!record.is_object()) throw LoadError("record " + std::to_string(i) + ": not an object");
    BenchTask task;
    task.question_id = field_string(record, "question_id", i, false);
    if (task.question_id.empty()) task.question_id = std::to_string(i);
    task.question = field_string(record, "question", i, true);
    task.db_id = field_string(record, "db_id", i, true);
    task.gold_sql = field_string(record, "SQL", i, true);
    std::string evidence = field_string(record, "evidence", i, false);
    if (!evidence.empty()) task.evidence_hint = std::move(evidence);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

namespace {

std::optional<double> as_number(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

// Total order used to canonicalize multisets: NULL < numbers < text < blob.
int type_rank(const Value& v) {
  switch (v.index()) {
    case 0: return 0;
    case 1:
    case 2: return 1;
    case 3: return 2;
    default: return 3;
  }
}

bool value_less(const Value& a, const Value& b) {
  const int ra = type_rank(a);
  const int rb = type_rank(b);
  if (ra != rb) return ra < rb;
  switch (ra) {
    case 0: return false;
    case 1: return *as_number(a) < *as_number(b);
    case 2: return std::get<std::string>(a) < std::get<std::string>(b);
    default: return std::get<Blob>(a) < std::get<Blob>(b);
  }
}

bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), value_less);
}

bool rows_equal(const Row& a, const Row& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), values_equal);
}

}  // namespace

bool values_equal(const Value& a, const Value& b) {
  const auto na = as_number(a);
  const auto nb = as_number(b);
  if (na && nb) {
    if (*na == *nb) return true;
    const double scale = std::max(std::fabs(*na), std::fabs(*nb));
    return std::fabs(*na - *nb) <= 1e-6 * scale;
  }
  if (na || nb) return false;
  return a == b;
}

int compare_results(const std::vector<Row>& gold, const std::vector<Row>& pred, bool gold_has_order_by) {
  if (gold.size() != pred.size()) return 0;
  if (gold_has_order_by) return std::equal(gold.begin(), gold.end(), pred.begin(), rows_equal) ? 1 : 0;

  std::vector<Row> g = gold;
  std::vector<Row> p = pred;
  std::sort(g.begin(), g.end(), row_less);
  std::sort(p.begin(), p.end(), row_less);
  if (std::equal(g.begin(), g.end(), p.begin(), rows_equal)) return 1;

  // Values within tolerance may sort differently; fall back to matching.
  constexpr std::size_t kMatchingLimit = 5000;
  if (g.size() > kMatchingLimit) return 0;
  std::vector<bool> used(p.size(), false);
  for (const auto& row : g) {
    bool found = false;
    for (std::size_t j = 0; j < p.size() && !found; ++j) {
      if (!used[j] && rows_equal(row, p[j])) used[j] = found = true;
    }
    if (!found) return 0;
  }
  return 1;
}

bool has_top_level_order_by(const std::string& sql_text) {
  try {
    return !sql::parse_select(sql_text).order_by.empty();
  } catch (const sql::SyntaxError&) {
    return false;
  }
}

nanoseconds default_timer(const std::function<nanoseconds()>& run) { return run(); }

nanoseconds measure_runtime(const std::string& sql_text, const std::filesystem::path& db_file, int trials,
                            const TrialTimer& timer, const SandboxLimits& limits) {
  if (trials < 1) throw ValidationError("trials must be at least 1, got " + std::to_string(trials));
  const std::function<nanoseconds()> run = [&] {
    SandboxResult r = execute_sandboxed(sql_text, db_file, limits);
    if (!r.outcome) {
      throw MeasurementError("execution failed while timing: " +
                             (r.stage.messages.empty() ? std::string("unknown error") : r.stage.messages.front()));
    }
    return r.outcome->runtime;
  };
  timer(run);  // warm-up
  std::vector<nanoseconds> samples;
  samples.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) samples.push_back(timer(run));
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  if (samples.size() % 2 == 1) return samples[mid];
  return (samples[mid - 1] + samples[mid]) / 2;
}

double relative_efficiency(nanoseconds e_gold, nanoseconds e_pred) {
  if (e_gold.count() <= 0 || e_pred.count() <= 0) {
    throw DomainError("runtimes must be positive (gold " + std::to_string(e_gold.count()) + " ns, predicted " +
                      std::to_string(e_pred.count()) + " ns)");
  }
  return std::sqrt(static_cast<double>(e_gold.count()) / static_cast<double>(e_pred.count()));
}

namespace {

std::optional<Money> average(const std::vector<Money>& costs) {
  if (costs.empty()) return std::nullopt;
  Money sum;
  for (const auto& c : costs) sum += c;
  return Money::from_picodollars(sum.picodollars() / static_cast<std::int64_t>(costs.size()));
}

}  // namespace

BenchReport compute_report(const std::vector<TaskResult>& results, const CostLedger& ledger,
                           const std::optional<Pricing>& baseline) {
  if (results.empty()) throw ValidationError("cannot compute a report over zero tasks");
  BenchReport report;
  report.n_tasks = results.size();
  report.per_task = results;

  std::size_t correct = 0;
  std::size_t local = 0;
  std::vector<double> r_values;
  std::vector<Money> local_costs;
  std::vector<Money> fallback_costs;
  for (const auto& t : results) {
    if (t.indicator == 1) {
      ++correct;
      r_values.push_back(t.r_value.value_or(0.0));
    }
    if (t.route == Route::LocalOnly) {
      ++local;
      local_costs.push_back(t.cost);
    } else if (t.route == Route::FallbackUsed) {
      fallback_costs.push_back(t.cost);
    }
  }
  std::sort(r_values.begin(), r_values.end());
  double r_sum = 0.0;
  for (double r : r_values) r_sum += r;

  const auto n = static_cast<double>(results.size());
  report.ex = static_cast<double>(correct) / n;
  report.ves = r_sum / n;
  report.local_fraction = static_cast<double>(local) / n;
  report.total_cost = ledger.total();
  report.avg_cost_per_query =
      Money::from_picodollars(report.total_cost.picodollars() / static_cast<std::int64_t>(results.size()));
  report.avg_local_cost = average(local_costs);
  report.avg_fallback_cost = average(fallback_costs);
  if (baseline) {
    report.baseline_avg_cost =
        Money::from_picodollars(ledger.reprice(*baseline).picodollars() / static_cast<std::int64_t>(results.size()));
  }
  return report;
}

namespace {

struct GoldRun {
  std::optional<ExecutionOutcome> outcome;
  std::string error;
};

TaskResult score_task(const BenchTask& task, const DatabaseResources* resources, const std::string& load_error,
                      const BenchmarkConfig& config, CostLedger& ledger, std::mutex& measure_mu) {
  TaskResult tr;
  tr.question_id = task.question_id;
  const Question question{task.question, task.db_id, task.evidence_hint};

  PipelineResult pr;
  if (resources) {
    pr = run_pipeline(question, *resources, config.backends, config.options, ledger, task.question_id);
  } else {
    pr.outcome = PipelineOutcome::ExtractionFailure;
    pr.error = "extraction failed: " + load_error;
    pr.cost = ledger.close_query(task.question_id, Route::Failed).cost;
  }
  tr.outcome = pr.outcome;
  tr.route = pr.route;
  tr.cost = pr.cost;
  tr.fallback_attempts = pr.fallback_attempts;
  tr.predicted_sql = pr.sql;
  tr.error = pr.error;
  if (!resources) return tr;

  const auto& db_file = resources->db_file;
  const SandboxLimits& limits = config.options.validation.limits;
  SandboxResult gold = execute_sandboxed(task.gold_sql, db_file, limits);
  std::lock_guard lock(measure_mu);
  if (!gold.outcome) {
    tr.error = "gold query failed: " + (gold.stage.messages.empty() ? std::string() : gold.stage.messages.front());
    return tr;
  }
  try {
    tr.e_gold = measure_runtime(task.gold_sql, db_file, config.trials, config.timer, limits);
  } catch (const Error& e) {
    tr.error = std::string("gold timing failed: ") + e.what();
    return tr;
  }
  if (pr.outcome != PipelineOutcome::Success || !pr.sql || !pr.rows) return tr;

  try {
    tr.e_pred = measure_runtime(*pr.sql, db_file, config.trials, config.timer, limits);
  } catch (const Error& e) {
    tr.error = std::string("predicted timing failed: ") + e.what();
    return tr;
  }
  if (pr.rows->truncated || gold.outcome->truncated) {
    tr.error = "result truncated at the row cap";
    return tr;
  }
  tr.indicator = compare_results(gold.outcome->rows, pr.rows->rows, has_top_level_order_by(task.gold_sql));
  if (tr.indicator == 1) {
    try {
      tr.r_value = relative_efficiency(tr.e_gold, *tr.e_pred);
    } catch (const DomainError& e) {
      tr.indicator = 0;
      tr.error = e.what();
    }
  }
  return tr;
}

}  // namespace

BenchReport run_benchmark(const std::vector<BenchTask>& tasks, const BenchmarkConfig& config, CostLedger* ledger) {
  for (const auto& task : tasks) {
    if (!config.registry.contains(task.db_id)) {
      throw ConfigError("database '" + task.db_id + "' not found under " + config.registry.root().string());
    }
  }
  CostLedger local_ledger;
  CostLedger& sink = ledger ? *ledger : local_ledger;

  // Resources load once per database and are shared read-only.
  std::map<std::string, std::optional<DatabaseResources>> resources;
  std::map<std::string, std::string> load_errors;
  std::map<std::string, std::mutex> measure_mu;
  for (const auto& task : tasks) {
    if (resources.count(task.db_id)) continue;
    measure_mu[task.db_id];
    load_errors[task.db_id];
    try {
      resources[task.db_id] = load_database_resources(config.registry, task.db_id, config.backends.embedder);
    } catch (const std::exception& e) {
      resources[task.db_id] = std::nullopt;
      load_errors[task.db_id] = e.what();
    }
  }

  std::vector<TaskResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const BenchTask& task = tasks[i];
      const auto& res = resources.at(task.db_id);
      try {
        results[i] = score_task(task, res ? &*res : nullptr, load_errors.at(task.db_id), config, sink,
                                measure_mu.at(task.db_id));
      } catch (const std::exception& e) {
        results[i].question_id = task.question_id;
        results[i].error = std::string("task aborted: ") + e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(config.workers, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (tasks.empty()) return BenchReport{};
  return compute_report(results, sink, config.baseline);
}

void write_report_json(const BenchReport& report, const std::filesystem::path& path) {
  auto ms = [](nanoseconds d) { return static_cast<double>(d.count()) / 1e6; };
  json tasks = json::array();
  for (const auto& t : report.per_task) {
    json j{{"question_id", t.question_id},
           {"indicator", t.indicator},
           {"route", to_string(t.route)},
           {"outcome", to_string(t.outcome)},
           {"fallback_attempts", t.fallback_attempts},
           {"cost_usd", t.cost.to_string(6)},
           {"e_gold_ms", ms(t.e_gold)}};
    j["predicted_sql"] = t.predicted_sql ? json(*t.predicted_sql) : json(nullptr);
    j["e_pred_ms"] = t.e_pred ? json(ms(*t.e_pred)) : json(nullptr);
    j["r_value"] = t.r_value ? json(*t.r_value) : json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    tasks.push_back(std::move(j));
  }
  auto money = [](const std::optional<Money>& m) { return m ? json(m->to_string(6)) : json(nullptr); };
  json doc{{"ex", report.ex},
           {"ves", report.ves},
           {"n_tasks", report.n_tasks},
           {"local_fraction", report.local_fraction},
           {"total_cost_usd", report.total_cost.to_string(6)},
           {"avg_cost_per_query_usd", report.avg_cost_per_query.to_string(6)},
           {"avg_local_cost_usd", money(report.avg_local_cost)},
           {"avg_fallback_cost_usd", money(report.avg_fallback_cost)},
           {"baseline_avg_cost_usd", money(report.baseline_avg_cost)},
           {"metadata",
            {{"result_comparison", "multiset; ordered when the gold query has a top-level ORDER BY"},
             {"numeric_tolerance", 1e-6},
             {"r_value_cap", nullptr},
             {"truncated_results", "scored as incorrect"}}},
           {"per_task", std::move(tasks)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

void write_report_csv(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  auto ms = [](nanoseconds d) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << static_cast<double>(d.count()) / 1e6;
    return s.str();
  };
  out << "question_id,indicator,r_value,route,cost,e_gold_ms,e_pred_ms\n";
  for (const auto& t : report.per_task) {
    std::ostringstream r;
    if (t.r_value) r << std::setprecision(12) << *t.r_value;
    out << quote(t.question_id) << ',' << t.indicator << ',' << r.str() << ',' << to_string(t.route) << ','
        << t.cost.to_string(6) << ',' << ms(t.e_gold) << ',' << (t.e_pred ? ms(*t.e_pred) : std::string()) << "\n";
  }
}

std::string render_summary(const BenchReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(8) << "Tasks" << std::setw(10) << "EX %" << std::setw(10) << "VES %"
      << std::setw(10) << "Local %" << "Cost/query ($)\n";
  out << std::setw(8) << report.n_tasks << std::setw(10) << report.ex * 100.0 << std::setw(10)
      << report.ves * 100.0 << std::setw(10) << report.local_fraction * 100.0 << report.avg_cost_per_query.to_string()
      << "\n";
  if (report.baseline_avg_cost) {
    out << "Baseline cost/query ($): " << report.baseline_avg_cost->to_string() << "\n";
  }
  return out.str();
}

}  // namespace nlsql
