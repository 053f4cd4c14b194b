#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "nlsql/gateway.hpp"
#include "nlsql/harness.hpp"
#include "nlsql/pipeline.hpp"
#include "nlsql/schema.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;       // bad flags or configuration
inline constexpr int kExitGeneration = 2;  // the pipeline could not answer
inline constexpr int kExitSetup = 3;       // missing database, docs or task file

struct EvalSettings {
  int trials = 5;
  int workers = 1;

  friend bool operator==(const EvalSettings&, const EvalSettings&) = default;
};

struct AppConfig {
  std::filesystem::path databases_root = "databases";
  std::filesystem::path prompts_dir;  // empty: built-in templates
  std::map<Role, BackendSpec> backends;
  RetrievalConfig retrieval;
  SandboxLimits sandbox;
  EvalSettings eval;
  bool strict_semantic = false;
  std::optional<Pricing> baseline_pricing;  // all-remote reference for reports

  /// Throws ConfigError unless all four roles are bound, the blend weights
  /// sum to 1 and the numeric settings are in range.
  void validate() const;
  /// Compares everything that is serialized; secrets and loaded fixtures are not.
  friend bool operator==(const AppConfig& a, const AppConfig& b);
};

/// YAML text to config. Paths are kept as written. Throws ConfigError.
AppConfig parse_config(const std::string& text);
std::string serialize_config(const AppConfig& config);

/// Reads a config file; relative paths resolve against its directory.
AppConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
std::optional<std::string> process_env(const std::string& name);

/// Applies NLSQL_DATABASES_ROOT, NLSQL_STRICT_SEMANTIC, NLSQL_WORKERS,
/// NLSQL_TRIALS, NLSQL_TIMEOUT_MS, NLSQL_MAX_ROWS and the fallback backend's
/// bearer token NLSQL_FALLBACK_TOKEN.
void apply_env(AppConfig& config, const EnvLookup& env);

/// Backends ready to call: scripted fixtures loaded, roles checked.
PipelineBackends resolve_backends(const AppConfig& config);
PipelineOptions pipeline_options(const AppConfig& config);

struct QueryFlags {
  bool json = false;
  bool strict_semantic = false;
};

struct EvalFlags {
  std::optional<int> workers;
  std::filesystem::path out_dir = ".";
};

int cmd_index(const AppConfig& config, const std::string& db_id, std::ostream& out, std::ostream& err);
int cmd_query(const AppConfig& config, const std::string& db_id, const std::string& question,
              const QueryFlags& flags, std::ostream& out, std::ostream& err);
int cmd_eval(const AppConfig& config, const std::filesystem::path& tasks_file, const EvalFlags& flags,
             std::ostream& out, std::ostream& err);
int cmd_repl(const AppConfig& config, const std::string& db_id, std::istream& in, std::ostream& out,
             std::ostream& err);

/// Full command line: global `--config PATH` and `--root DIR`, then one of
/// `index`, `query`, `eval`, `repl`. The config file is NLSQL_CONFIG, else
/// ./nlsql.yaml. Precedence is flags > environment > file.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);

}  // namespace nlsql
