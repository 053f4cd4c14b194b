#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nlsql/decomposer.hpp"
#include "nlsql/schema.hpp"

namespace nlsql {

using Blob = std::vector<unsigned char>;
/// An SQLite scalar: NULL, INTEGER, REAL, TEXT or BLOB.
using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;
using Row = std::vector<Value>;

std::string to_display(const Value& value);

enum class Stage { ValueCheck, Syntax, Execution, Semantic };
enum class StageStatus { Pass, Warn, Fail };

std::string_view to_string(Stage stage);
std::string_view to_string(StageStatus status);

struct StageResult {
  Stage stage = Stage::ValueCheck;
  StageStatus status = StageStatus::Pass;
  std::vector<std::string> messages;

  friend bool operator==(const StageResult&, const StageResult&) = default;
};

struct Correction {
  std::string original_literal;
  std::string corrected_literal;
  std::string table;
  std::string column;

  friend bool operator==(const Correction&, const Correction&) = default;
};

struct ValidationReport {
  std::vector<StageResult> stage_results;  // fixed stage order; stops at the first Fail
  std::vector<Correction> corrections;

  bool failed() const;
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

struct ExecutionOutcome {
  std::vector<std::string> column_names;
  std::vector<Row> rows;
  std::chrono::nanoseconds runtime{0};
  bool truncated = false;

  friend bool operator==(const ExecutionOutcome&, const ExecutionOutcome&) = default;
};

struct SandboxLimits {
  std::chrono::milliseconds timeout{30000};
  std::size_t max_rows = 10000;

  friend bool operator==(const SandboxLimits&, const SandboxLimits&) = default;
};

/// Everything the fallback generator is told about a rejected candidate.
struct DiagnosticBundle {
  std::vector<std::string> execution_errors;
  std::vector<std::string> validation_warnings;
  std::string failed_sql;

  bool empty() const { return execution_errors.empty() && validation_warnings.empty(); }
  friend bool operator==(const DiagnosticBundle&, const DiagnosticBundle&) = default;
};

struct AutocorrectResult {
  std::string sql;
  std::vector<Correction> corrections;
};

/// Rewrites string literals compared with =, ==, !=, <> or [NOT] IN against a
/// column that has evidence entries: a literal matching an entry's db_value
/// case-insensitively (or its nl_term) becomes the exact db_value. LIKE
/// patterns are never touched. Works on tokens, so unparseable SQL is fine.
AutocorrectResult autocorrect_values(const std::string& sql, const EvidenceMap& evidence);

/// Parse check plus table/column resolution through aliases, CTEs, subqueries
/// and outer scopes. Fails on malformed SQL, non-SELECT or multiple
/// statements, and unknown references; warns on JOIN without ON/USING.
StageResult validate_syntax(const std::string& sql, const SchemaCatalog& catalog);

struct SandboxResult {
  StageResult stage;
  std::optional<ExecutionOutcome> outcome;  // set unless stage failed
};

/// Runs one statement on a fresh read-only connection inside a transaction
/// that is always rolled back. Anything but reading is refused by an
/// authorizer; the row cap sets `truncated`; the timeout interrupts the VM.
SandboxResult execute_sandboxed(const std::string& sql, const std::filesystem::path& db_file,
                                const SandboxLimits& limits = {});

/// Checks result arity against the plan, flags empty results and aggregate
/// mismatches between plan and query.
StageResult validate_semantics(const ExecutionOutcome& outcome, const DecompositionPlan& plan,
                               const std::string& sql);

struct ValidationPolicy {
  SandboxLimits limits;
  bool strict_semantic = false;  // promote semantic warnings to failures
};

struct Accepted {
  std::string sql;  // after autocorrection
  ExecutionOutcome outcome;
  ValidationReport report;

  friend bool operator==(const Accepted&, const Accepted&) = default;
};

struct Rejected {
  DiagnosticBundle bundle;
  ValidationReport report;

  friend bool operator==(const Rejected&, const Rejected&) = default;
};

using Verdict = std::variant<Accepted, Rejected>;

/// Runs the four stages in order. Never throws: every problem is a Rejected.
Verdict validate_full(const std::string& sql, const SchemaContext& context, const DecompositionPlan& plan,
                      const std::filesystem::path& db_file, const ValidationPolicy& policy = {});

}  // namespace nlsql
