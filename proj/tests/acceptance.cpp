// Acceptance checks: one PASS/FAIL line per criterion, with its runtime
// against the allowed budget. Exits 1 when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "nlsql/harness.hpp"
#include "nlsql/pipeline.hpp"
#include "nlsql/validator.hpp"

using namespace nlsql;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, std::chrono::milliseconds budget, const std::function<void(Check&)>& body) {
  Check c;
  const auto start = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(Clock::now() - start);
  if (elapsed > budget) {
    c.ok = false;
    c.detail << " [over budget]";
  }
  if (!c.ok) ++failures;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.1f ms / %lld ms", elapsed.count(), static_cast<long long>(budget.count()));
  std::cout << (c.ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << c.detail.str() << " (" << timing
            << ")" << std::endl;
}

TaskResult scored(int indicator, std::optional<double> r) {
  TaskResult t;
  t.indicator = indicator;
  t.r_value = r;
  t.route = Route::LocalOnly;
  return t;
}

// 1. EX and VES by direct substitution.
void metric_oracle(Check& c) {
  const std::vector<TaskResult> results{scored(1, 1.0), scored(1, 2.0), scored(0, std::nullopt),
                                        scored(1, 0.5), scored(0, std::nullopt), scored(1, 1.0)};
  CostLedger ledger;
  const BenchReport r = compute_report(results, ledger);
  c.detail << "EX=" << r.ex << " VES=" << r.ves;
  c.expect(std::fabs(r.ex - 4.0 / 6.0) < 1e-12, "EX = 4/6");
  c.expect(std::fabs(r.ves - 0.75) < 1e-12, "VES = 0.75");
}

// 2. R = sqrt(E_gold / E_pred).
void relative_efficiency_check(Check& c) {
  const double a = relative_efficiency(100ns, 25ns);
  const double b = relative_efficiency(50ns, 200ns);
  c.detail << "R(100,25)=" << a << " R(50,200)=" << b;
  c.expect(std::fabs(a - 2.0) < 1e-12, "R(100,25) = 2");
  c.expect(std::fabs(b - 0.5) < 1e-12, "R(50,200) = 0.5");
}

// 3. Primary plus exactly three fallback attempts, then a generation failure.
void fallback_bound(Check& c) {
  testing::TempDir dir;
  testing::make_schools_db(dir.path());
  const std::string q = "What is the mascot of every school?";
  const auto b = testing::scripted_backends({{q, {testing::simple_plan({"schools.sname"})}}},
                                            {{q, {"SELECT mascot FROM schools"}}},
                                            {{q, {"SELECT mascot_name FROM schools"}}});
  CostLedger ledger;
  const auto r = run_pipeline({q, "schools", {}}, DatabaseRegistry(dir.path()), b, PipelineOptions{}, ledger, "q");
  const std::size_t fallback_calls = b.fallback.script->calls();
  c.detail << "fallback calls=" << fallback_calls << " outcome=" << to_string(r.outcome)
           << " bundles=" << r.bundle_history.size();
  c.expect(fallback_calls == 3, "3 fallback invocations");
  c.expect(r.fallback_attempts == 3, "3 attempts recorded");
  c.expect(r.outcome == PipelineOutcome::GenerationFailure, "generation failure");
  c.expect(r.route == Route::Failed, "route failed");
  c.expect(r.bundle_history.size() == 4, "4 bundles");
}

// 4. Cost routing: 67 local and 33 fallback queries over the same token pattern.
void cost_routing(Check& c) {
  const Pricing local_price{0.0, 0.0};
  const Pricing fallback_price{2.5, 10.0};
  const Pricing baseline_price{30.0, 60.0};
  const TokenUsage pattern{2800, 200};

  // Ledger arithmetic: every query makes one generation call with the same
  // pattern; the route decides which backend bills it.
  auto local = scripted_backend(std::map<std::string, std::string>{{"k", "v"}}, Role::PrimaryGenerator, "local");
  local.pricing = local_price;
  auto remote = scripted_backend(std::map<std::string, std::string>{{"k", "v"}}, Role::FallbackGenerator, "remote");
  remote.pricing = fallback_price;
  CostLedger ledger;
  for (int i = 0; i < 100; ++i) {
    const std::string id = "q" + std::to_string(i);
    const bool fallback = i % 3 == 2 && i < 99;  // 33 of 100
    ledger.record_usage(id, fallback ? remote : local, pattern);
    ledger.close_query(id, fallback ? Route::FallbackUsed : Route::LocalOnly);
  }
  std::size_t n_fallback = 0;
  for (const auto& q : ledger.per_query()) n_fallback += q.route == Route::FallbackUsed;
  const Money measured_avg = Money::from_picodollars(ledger.total().picodollars() / 100);
  const Money baseline_avg = Money::from_picodollars(ledger.reprice(baseline_price).picodollars() / 100);
  // By hand: 33 * (2800 * 2.5 + 200 * 10) / 1e6 / 100 = 0.00297; 2800 * 30e-6 + 200 * 60e-6 = 0.096.
  c.expect(n_fallback == 33, "33 fallback queries");
  c.expect(measured_avg == Money::from_dollars(0.00297), "average $0.00297");
  c.expect(baseline_avg == Money::from_dollars(0.096), "baseline $0.096");
  c.expect(measured_avg.picodollars() * 10 < baseline_avg.picodollars(), "average below 10% of baseline");
  c.detail << "ledger avg=$" << measured_avg.to_string(5) << " baseline=$" << baseline_avg.to_string(5)
           << " ratio=" << measured_avg.dollars() / baseline_avg.dollars();

  // The same split through the benchmark runner with scripted backends.
  testing::TempDir dir;
  testing::make_schools_db(dir.path());
  std::map<std::string, std::vector<std::string>> decomposer, primary, fallback;
  std::vector<BenchTask> tasks;
  const std::string plan = testing::simple_plan({"schools.sname"});
  for (int i = 0; i < 100; ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "[task %03d]", i);
    const std::string q = std::string("List school names ") + key;
    decomposer[q] = {plan};
    const bool to_fallback = i % 3 == 2 && i < 99;
    primary[q] = {to_fallback ? "SELECT school_name FROM schools" : "SELECT sname FROM schools"};
    fallback[q] = {"SELECT sname FROM schools"};
    tasks.push_back({std::to_string(i), q, "schools", "SELECT sname FROM schools", {}});
  }
  BenchmarkConfig cfg;
  cfg.registry = DatabaseRegistry(dir.path());
  cfg.backends = testing::scripted_backends(decomposer, primary, fallback, fallback_price);
  cfg.trials = 1;
  cfg.baseline = baseline_price;
  CostLedger run_ledger;
  const BenchReport rep = run_benchmark(tasks, cfg, &run_ledger);
  c.detail << "; runner local=" << rep.local_fraction << " avg=$" << rep.avg_cost_per_query.to_string(6)
           << " baseline=$" << rep.baseline_avg_cost->to_string(6);
  c.expect(rep.local_fraction == 0.67, "runner local fraction 0.67");
  c.expect(rep.ex == 1.0, "runner EX 1");
  c.expect(rep.avg_cost_per_query.picodollars() * 10 < rep.baseline_avg_cost->picodollars(),
           "runner average below 10% of baseline");
}

// 5. Region literal with the wrong case is fixed and the query runs.
void autocorrection(Check& c) {
  testing::TempDir dir;
  const auto db = testing::make_financial_db(dir.path());
  const EvidenceMap ev = load_evidence(DatabaseRegistry(dir.path()).evidence_file("financial"));
  const std::string sql =
      "SELECT COUNT(T1.account_id) FROM account AS T1 INNER JOIN district AS T2 ON T1.district_id = T2.district_id "
      "WHERE T2.a3 = 'East Bohemia'";
  const auto raw = execute_sandboxed(sql, db);
  const auto fixed = autocorrect_values(sql, ev);
  const auto again = autocorrect_values(fixed.sql, ev);
  const auto run = execute_sandboxed(fixed.sql, db);
  const bool has_fix = fixed.sql.find("'east Bohemia'") != std::string::npos;
  c.expect(has_fix && fixed.corrections.size() == 1, "literal corrected to 'east Bohemia'");
  c.expect(run.outcome.has_value(), "corrected query executes");
  const auto count = run.outcome ? std::get<std::int64_t>(run.outcome->rows.at(0).at(0)) : -1;
  const auto raw_count = raw.outcome ? std::get<std::int64_t>(raw.outcome->rows.at(0).at(0)) : -1;
  c.expect(count == 3, "3 accounts in east Bohemia");
  c.expect(again.sql == fixed.sql && again.corrections.empty(), "idempotent");
  c.detail << "rows before=" << raw_count << " after=" << count << " idempotent=" << (again.sql == fixed.sql);
}

// 6. Adversarial statements leave the file untouched.
void sandbox_purity(Check& c) {
  testing::TempDir dir;
  const auto db = testing::make_schools_db(dir.path());
  const std::string before = testing::file_sha256(db);
  const std::vector<std::string> corpus{
      "INSERT INTO schools VALUES ('99', 'x', 'y', 'N', 'z')",
      "UPDATE satscores SET avgscrmath = 800",
      "DELETE FROM satscores",
      "REPLACE INTO schools VALUES ('01001', 'a', 'b', 'c', 'd')",
      "INSERT INTO satscores SELECT * FROM satscores RETURNING cds",
      "DROP TABLE schools",
      "ALTER TABLE schools ADD COLUMN hacked TEXT",
      "CREATE TABLE evil(x)",
      "CREATE INDEX idx ON schools(county)",
      "CREATE TRIGGER t AFTER INSERT ON schools BEGIN DELETE FROM satscores; END",
      "VACUUM",
      "PRAGMA user_version = 42",
      "PRAGMA journal_mode = WAL",
      "ATTACH DATABASE '" + (dir.path() / "other.sqlite").string() + "' AS other",
      "SELECT 1; DELETE FROM schools",
      "SELECT * FROM schools; DROP TABLE satscores;",
      "COMMIT; DELETE FROM schools",
      "SELECT load_extension('/tmp/evil.so')",
      "WITH RECURSIVE r(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM r) SELECT count(*) FROM r",
      "SELECT count(*) FROM schools a, schools b, schools c, schools d, schools e, schools f, schools g, schools h, "
      "schools i, schools j, schools k, schools l, schools m, schools n WHERE a.sname || n.sname = ''",
  };
  SandboxLimits limits;
  limits.timeout = 200ms;
  std::size_t refused = 0, unchanged = 0;
  for (const auto& sql : corpus) {
    const auto r = execute_sandboxed(sql, db, limits);
    refused += r.stage.status == StageStatus::Fail;
    if (r.stage.status != StageStatus::Fail) c.detail << " accepted: " << sql << ";";
    unchanged += testing::file_sha256(db) == before;
  }
  const bool no_side_files = !std::filesystem::exists(dir.path() / "other.sqlite") &&
                             !std::filesystem::exists(dir.path() / "schools" / "schools.sqlite-wal");
  c.detail << corpus.size() << " statements, " << refused << " refused, checksum unchanged after " << unchanged;
  c.expect(corpus.size() == 20, "20 statements");
  c.expect(unchanged == corpus.size(), "checksum unchanged after every call");
  c.expect(refused == corpus.size(), "every statement refused");
  c.expect(no_side_files, "no files created");
}

// 7. Exact top-k against a brute-force cosine ranking.
void retrieval_equivalence(Check& c) {
  constexpr std::size_t kDim = 128, kSegments = 500, kQueries = 50, kK = 10;
  std::mt19937_64 rng(424242);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  auto random_vec = [&] {
    std::vector<float> v(kDim);
    for (auto& x : v) x = gauss(rng);
    return v;
  };
  VectorStore store(kDim);
  std::vector<DocSegment> docs;
  for (std::size_t i = 0; i < kSegments; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "seg%04zu", i);
    DocSegment d{id, "segment text", SegmentKind::ColumnDefinition, random_vec()};
    docs.push_back(d);
    store.add(d);
  }
  std::size_t matched = 0;
  double worst_ms = 0.0;
  for (std::size_t qi = 0; qi < kQueries; ++qi) {
    const auto q = random_vec();
    const auto t0 = Clock::now();
    const auto got = store.retrieve(q, kK);
    worst_ms = std::max(worst_ms, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());

    std::vector<std::pair<double, std::string>> brute;
    for (const auto& d : docs) {
      double dot = 0, nq = 0, nd = 0;
      for (std::size_t j = 0; j < kDim; ++j) {
        dot += double(q[j]) * d.embedding[j];
        nq += double(q[j]) * q[j];
        nd += double(d.embedding[j]) * d.embedding[j];
      }
      brute.emplace_back(dot / (std::sqrt(nq) * std::sqrt(nd)), d.id);
    }
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool same = got.size() == kK;
    for (std::size_t j = 0; same && j < kK; ++j) {
      same = got[j].segment.id == brute[j].second && std::fabs(got[j].cosine - brute[j].first) < 1e-9;
    }
    matched += same;
  }
  c.detail << matched << "/" << kQueries << " queries match brute force, slowest " << worst_ms << " ms";
  c.expect(matched == kQueries, "every query matches");
  c.expect(worst_ms < 1000.0, "under one second per query");
}

// 8. Five tasks on the schools fixture: three local, one via fallback, one failed.
struct EndToEnd {
  std::vector<BenchTask> tasks;
  std::map<std::string, std::vector<std::string>> decomposer, primary, fallback;
};

EndToEnd end_to_end_fixture() {
  EndToEnd f;
  auto add = [&](const std::string& id, const std::string& q, const std::string& gold,
                 const std::vector<std::string>& output, const std::string& local, const std::string& remote) {
    f.tasks.push_back({id, q, "schools", gold, {}});
    f.decomposer[q] = {testing::simple_plan(output)};
    f.primary[q] = {testing::fenced_sql(local)};
    f.fallback[q] = {testing::fenced_sql(remote)};
  };
  add("t1", "List the names of all charter schools.", "SELECT sname FROM schools WHERE charter = 'Y'",
      {"schools.sname"}, "SELECT sname FROM schools WHERE charter = 'Y'", "SELECT 1");
  add("t2", "How many schools are in Fresno County?", "SELECT COUNT(*) FROM schools WHERE county = 'Fresno'",
      {"COUNT(*)"}, "SELECT COUNT(cdscode) FROM schools WHERE county = 'fresno'", "SELECT 1");
  add("t3", "What is the average SAT math score of charter schools?",
      "SELECT AVG(T2.avgscrmath) FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.cdscode = T2.cds "
      "WHERE T1.charter = 'Y'",
      {"AVG(satscores.avgscrmath)"},
      "SELECT AVG(avgscrmath) FROM satscores WHERE cds IN (SELECT cdscode FROM schools WHERE charter = 'Y')",
      "SELECT 1");
  add("t4", "Which school has the most SAT test takers?",
      "SELECT T1.sname FROM schools AS T1 INNER JOIN satscores AS T2 ON T1.cdscode = T2.cds "
      "ORDER BY T2.numtsttakr DESC LIMIT 1",
      {"schools.sname"},
      "SELECT T1.sname FROM schools AS T1 JOIN satscores AS T2 ON T1.cdscode = T2.cds "
      "ORDER BY T2.num_test_takers DESC LIMIT 1",
      "SELECT T1.sname FROM schools AS T1 JOIN satscores AS T2 ON T1.cdscode = T2.cds "
      "ORDER BY T2.numtsttakr DESC LIMIT 1");
  add("t5", "What is the excellence rate of each school in Alameda County?",
      "SELECT T1.sname, CAST(T2.numge1500 AS REAL) / T2.numtsttakr FROM schools AS T1 "
      "INNER JOIN satscores AS T2 ON T1.cdscode = T2.cds WHERE T1.county = 'Alameda'",
      {"schools.sname", "CAST(satscores.numge1500 AS REAL) / satscores.numtsttakr"},
      "SELECT sname, excellence_rate FROM schools WHERE county = 'Alameda'",
      "SELECT T1.sname, T2.excellence FROM schools AS T1 JOIN satscores AS T2 ON T1.cdscode = T2.cds "
      "WHERE T1.county = 'Alameda'");
  return f;
}

void end_to_end(Check& c) {
  testing::TempDir dir;
  testing::make_schools_db(dir.path());
  const EndToEnd f = end_to_end_fixture();
  // Fixed per-trial runtime so whole TaskResults, r-values included, can be compared.
  const TrialTimer steady = [](const std::function<std::chrono::nanoseconds()>& run) {
    run();
    return std::chrono::nanoseconds(1'000'000);
  };
  auto run_with = [&](int workers, const TrialTimer& timer) {
    BenchmarkConfig cfg;
    cfg.registry = DatabaseRegistry(dir.path());
    cfg.backends = testing::scripted_backends(f.decomposer, f.primary, f.fallback);
    cfg.workers = workers;
    cfg.trials = 3;
    cfg.timer = timer;
    return run_benchmark(f.tasks, cfg);
  };
  const BenchReport one = run_with(1, steady);
  const BenchReport four = run_with(4, steady);
  const BenchReport timed = run_with(4, default_timer);
  std::size_t failed = 0;
  for (const auto& t : one.per_task) failed += t.route == Route::Failed;
  c.detail << "EX=" << one.ex << " local=" << one.local_fraction << " failed=" << failed
           << " identical(1 vs 4 workers)=" << (one.per_task == four.per_task);
  c.expect(std::fabs(one.ex - 0.8) < 1e-12, "EX 0.8");
  c.expect(std::fabs(one.local_fraction - 0.6) < 1e-12, "local fraction 0.6");
  c.expect(failed == 1, "one failed route");
  c.expect(one.per_task == four.per_task, "identical per-task results");
  c.expect(one.ex == four.ex && one.ves == four.ves && one.local_fraction == four.local_fraction &&
               one.total_cost == four.total_cost,
           "identical report");
  c.expect(timed.ex == one.ex && timed.local_fraction == one.local_fraction, "same scores with real timing");
  c.expect(one.per_task.at(3).route == Route::FallbackUsed && one.per_task.at(4).route == Route::Failed,
           "fallback and failure on the expected tasks");
}

// 9. Result comparison semantics.
void result_equality(Check& c) {
  auto r = [](std::int64_t a, std::string b) { return Row{a, std::move(b)}; };
  const std::vector<Row> gold{r(1, "a"), r(2, "b"), r(2, "b"), r(3, "c")};
  const std::vector<Row> permuted{r(3, "c"), r(2, "b"), r(1, "a"), r(2, "b")};
  const std::vector<Row> fewer_dups{r(1, "a"), r(2, "b"), r(3, "c"), r(3, "c")};
  const std::vector<Row> missing_row{r(1, "a"), r(2, "b"), r(3, "c")};
  const std::string unordered_gold = "SELECT id, v FROM t";
  const std::string ordered_gold = "SELECT id, v FROM t ORDER BY id";
  const bool unordered_ok = compare_results(gold, permuted, has_top_level_order_by(unordered_gold)) == 1;
  const bool ordered_rejects = compare_results(gold, permuted, has_top_level_order_by(ordered_gold)) == 0;
  const bool ordered_accepts = compare_results(gold, gold, has_top_level_order_by(ordered_gold)) == 1;
  const bool cardinality = compare_results(gold, fewer_dups, false) == 0 && compare_results(gold, missing_row, false) == 0;
  const bool nested_order = !has_top_level_order_by("SELECT id FROM (SELECT id FROM t ORDER BY id)");
  c.detail << "permuted unordered=" << unordered_ok << " ordered enforced=" << (ordered_rejects && ordered_accepts)
           << " cardinality mismatch fails=" << cardinality;
  c.expect(unordered_ok, "permutation equal without ORDER BY");
  c.expect(ordered_rejects && ordered_accepts, "order enforced with ORDER BY");
  c.expect(cardinality, "multiset cardinality mismatches fail");
  c.expect(nested_order, "only a top-level ORDER BY counts");
}

}  // namespace

int main() {
  criterion(1, "metric oracle", 1000ms, metric_oracle);
  criterion(2, "relative efficiency", 1000ms, relative_efficiency_check);
  criterion(3, "fallback ladder bound", 5000ms, fallback_bound);
  criterion(4, "cost routing", 30000ms, cost_routing);
  criterion(5, "value autocorrection", 1000ms, autocorrection);
  criterion(6, "sandbox purity", 60000ms, sandbox_purity);
  criterion(7, "retrieval equivalence", 60000ms, retrieval_equivalence);
  criterion(8, "end-to-end fixture benchmark", 30000ms, end_to_end);
  criterion(9, "result equality semantics", 1000ms, result_equality);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
