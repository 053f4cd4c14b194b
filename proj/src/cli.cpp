#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "nlsql/cli.hpp"
#include "nlsql/errors.hpp"

namespace nlsql {

using json = nlohmann::json;

namespace {

constexpr std::size_t kDisplayRows = 50;

json value_json(const Value& v) {
  if (std::holds_alternative<std::monostate>(v)) return nullptr;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return to_display(v);
}

void print_table(const ExecutionOutcome& outcome, std::ostream& out) {
  const std::size_t shown = std::min(outcome.rows.size(), kDisplayRows);
  std::vector<std::size_t> width(outcome.column_names.size());
  for (std::size_t c = 0; c < width.size(); ++c) width[c] = outcome.column_names[c].size();
  for (std::size_t r = 0; r < shown; ++r) {
    for (std::size_t c = 0; c < width.size(); ++c) width[c] = std::max(width[c], to_display(outcome.rows[r][c]).size());
  }
  auto line = [&](auto cell) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      out << (c ? " | " : "") << std::left << std::setw(static_cast<int>(width[c])) << cell(c);
    }
    out << "\n";
  };
  line([&](std::size_t c) { return outcome.column_names[c]; });
  line([&](std::size_t c) { return std::string(width[c], '-'); });
  for (std::size_t r = 0; r < shown; ++r) line([&](std::size_t c) { return to_display(outcome.rows[r][c]); });
  if (outcome.rows.size() > shown) out << "… " << outcome.rows.size() - shown << " more rows\n";
  if (outcome.truncated) out << "(result truncated at the row cap)\n";
}

void print_bundle(const DiagnosticBundle& b, std::ostream& out) {
  out << "failed SQL: " << (b.failed_sql.empty() ? "(none)" : b.failed_sql) << "\n";
  for (const auto& e : b.execution_errors) out << "error: " << e << "\n";
  for (const auto& w : b.validation_warnings) out << "warning: " << w << "\n";
}

std::string route_text(const PipelineResult& r) {
  return std::string(to_string(r.route)) + " (fallback attempts: " + std::to_string(r.fallback_attempts) + ")";
}

json bundle_json(const DiagnosticBundle& b) {
  return {{"execution_errors", b.execution_errors},
          {"validation_warnings", b.validation_warnings},
          {"failed_sql", b.failed_sql}};
}

json result_json(const PipelineResult& r) {
  json j{{"status", to_string(r.outcome)},
         {"route", to_string(r.route)},
         {"fallback_attempts", r.fallback_attempts},
         {"cost_usd", r.cost.to_string(6)}};
  json usage = json::object();
  for (const auto& [name, u] : r.usage) usage[name] = {{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
  j["usage"] = std::move(usage);
  if (r.outcome == PipelineOutcome::Success) {
    j["sql"] = *r.sql;
    j["columns"] = r.rows->column_names;
    json rows = json::array();
    for (const auto& row : r.rows->rows) {
      json jr = json::array();
      for (const auto& v : row) jr.push_back(value_json(v));
      rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    j["truncated"] = r.rows->truncated;
    json corrections = json::array();
    if (r.report) {
      for (const auto& c : r.report->corrections) {
        corrections.push_back({{"original", c.original_literal},
                               {"corrected", c.corrected_literal},
                               {"table", c.table},
                               {"column", c.column}});
      }
    }
    j["corrections"] = std::move(corrections);
  } else {
    j["error"] = r.error;
    j["bundle"] = r.bundle_history.empty() ? json(nullptr) : bundle_json(r.bundle_history.back());
  }
  return j;
}

int exit_code_for(const PipelineResult& r) {
  switch (r.outcome) {
    case PipelineOutcome::Success: return kExitOk;
    case PipelineOutcome::ExtractionFailure: return kExitSetup;
    default: return kExitGeneration;
  }
}

void print_result(const PipelineResult& r, std::ostream& out) {
  if (r.outcome == PipelineOutcome::Success) {
    out << "SQL: " << *r.sql << "\n\n";
    print_table(*r.rows, out);
    out << "(" << r.rows->rows.size() << " rows)\n";
    if (r.report) {
      for (const auto& c : r.report->corrections) {
        out << "corrected '" << c.original_literal << "' to '" << c.corrected_literal << "' (" << c.table << "."
            << c.column << ")\n";
      }
    }
  } else {
    out << r.error << "\n";
    if (!r.bundle_history.empty()) print_bundle(r.bundle_history.back(), out);
  }
  out << "route: " << route_text(r) << "\n";
  out << "cost: $" << r.cost.to_string() << "\n";
}

struct Session {
  DatabaseRegistry registry;
  PipelineBackends backends;
  PipelineOptions options;
  DatabaseResources resources;
};

Session open_session(const AppConfig& config, const std::string& db_id) {
  Session s{DatabaseRegistry(config.databases_root), resolve_backends(config), pipeline_options(config), {}};
  s.resources = load_database_resources(s.registry, db_id, s.backends.embedder);
  return s;
}

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

int cmd_index(const AppConfig& config, const std::string& db_id, std::ostream& out, std::ostream& err) {
  try {
    const DatabaseRegistry registry(config.databases_root);
    const PipelineBackends backends = resolve_backends(config);
    std::vector<std::string> warnings;
    const std::size_t n = build_index(registry, db_id, backends.embedder, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    out << "indexed " << n << " segments for " << db_id << " -> " << registry.embedding_cache(db_id).string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSetup;
  }
}

int cmd_query(const AppConfig& base, const std::string& db_id, const std::string& question, const QueryFlags& flags,
              std::ostream& out, std::ostream& err) {
  AppConfig config = base;
  config.strict_semantic = config.strict_semantic || flags.strict_semantic;
  if (is_blank(question)) {
    err << "error: question is empty\n";
    return kExitUsage;
  }
  Session session;
  try {
    session = open_session(config, db_id);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSetup;
  }
  CostLedger ledger;
  const PipelineResult r = run_pipeline(Question{question, db_id, std::nullopt}, session.resources,
                                        session.backends, session.options, ledger, "q1");
  if (flags.json) {
    out << result_json(r).dump() << "\n";
  } else {
    print_result(r, out);
  }
  return exit_code_for(r);
}

int cmd_eval(const AppConfig& config, const std::filesystem::path& tasks_file, const EvalFlags& flags,
             std::ostream& out, std::ostream& err) {
  std::vector<BenchTask> tasks;
  BenchmarkConfig bench;
  try {
    tasks = load_tasks(tasks_file);
    bench.registry = DatabaseRegistry(config.databases_root);
    bench.backends = resolve_backends(config);
    bench.options = pipeline_options(config);
    bench.workers = flags.workers.value_or(config.eval.workers);
    bench.trials = config.eval.trials;
    bench.baseline = config.baseline_pricing;
    if (bench.workers < 1) throw ConfigError("--workers must be at least 1");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSetup;
  }
  BenchReport report;
  try {
    report = run_benchmark(tasks, bench);
    std::filesystem::create_directories(flags.out_dir);
    if (!tasks.empty()) {
      write_report_json(report, flags.out_dir / "report.json");
      write_report_csv(report, flags.out_dir / "report.csv");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSetup;
  }
  if (tasks.empty()) {
    out << "no tasks\n";
    return kExitOk;
  }
  out << render_summary(report);
  out << "reports: " << (flags.out_dir / "report.json").string() << ", " << (flags.out_dir / "report.csv").string()
      << "\n";
  return kExitOk;
}

int cmd_repl(const AppConfig& config, const std::string& db_id, std::istream& in, std::ostream& out,
             std::ostream& err) {
  Session session;
  try {
    session = open_session(config, db_id);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSetup;
  }
  CostLedger ledger;
  int n = 0;
  std::string line;
  while (true) {
    out << "nlsql> " << std::flush;
    if (!std::getline(in, line)) break;
    if (is_blank(line)) continue;
    const auto b = line.find_first_not_of(" \t");
    const auto e = line.find_last_not_of(" \t\r");
    const std::string text = line.substr(b, e - b + 1);
    if (text == "\\q") break;
    if (text == "\\cost") {
      for (const auto& q : ledger.per_query()) {
        out << q.query_id << "  " << to_string(q.route) << "  $" << q.cost.to_string() << "\n";
      }
      out << "session total: $" << ledger.total().to_string() << " over " << ledger.per_query().size()
          << " queries\n";
      continue;
    }
    try {
      const PipelineResult r = run_pipeline(Question{text, db_id, std::nullopt}, session.resources, session.backends,
                                            session.options, ledger, "q" + std::to_string(++n));
      print_result(r, out);
    } catch (const std::exception& ex) {
      err << "error: " << ex.what() << "\n";
    }
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
  // Library warnings go to stderr so --json output stays one clean line.
  spdlog::set_default_logger(
      std::make_shared<spdlog::logger>("nlsql", std::make_shared<spdlog::sinks::stderr_sink_mt>()));
  CLI::App app{"Schema-aware natural language to SQL pipeline", "nlsql"};
  app.require_subcommand(1);
  std::string config_path;
  std::string root;
  app.add_option("--config", config_path, "Configuration file (default: $NLSQL_CONFIG or ./nlsql.yaml)");
  app.add_option("--root", root, "Databases root directory");

  std::string db_id;
  std::string question;
  std::string tasks_file;
  QueryFlags query_flags;
  EvalFlags eval_flags;
  int workers = 0;
  std::string out_dir = ".";

  auto* index = app.add_subcommand("index", "Build the embedding cache for a database");
  index->add_option("db_id", db_id)->required();
  auto* query = app.add_subcommand("query", "Answer one question");
  query->add_option("db_id", db_id)->required();
  query->add_option("question", question)->required();
  query->add_flag("--json", query_flags.json, "Print one JSON object instead of tables");
  query->add_flag("--strict-semantic", query_flags.strict_semantic, "Reject candidates with semantic warnings");
  auto* eval = app.add_subcommand("eval", "Run a benchmark task file");
  eval->add_option("tasks", tasks_file)->required();
  auto* workers_opt = eval->add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);
  eval->add_option("--out", out_dir, "Directory for report.json and report.csv");
  auto* repl = app.add_subcommand("repl", "Interactive session");
  repl->add_option("db_id", db_id)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  AppConfig config;
  try {
    if (config_path.empty()) config_path = env("NLSQL_CONFIG").value_or("nlsql.yaml");
    config = load_config(config_path);
    apply_env(config, env);
    if (!root.empty()) config.databases_root = root;
    config.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (index->parsed()) return cmd_index(config, db_id, out, err);
  if (query->parsed()) return cmd_query(config, db_id, question, query_flags, out, err);
  if (eval->parsed()) {
    if (workers_opt->count() > 0) eval_flags.workers = workers;
    eval_flags.out_dir = out_dir;
    return cmd_eval(config, tasks_file, eval_flags, out, err);
  }
  return cmd_repl(config, db_id, in, out, err);
}

}  // namespace nlsql
