#include <cstdio>

#include "nlsql/sql.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

std::string to_display(const Value& value) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "NULL"; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.15g", v);
      return buf;
    }
    std::string operator()(const std::string& v) const { return v; }
    std::string operator()(const Blob& v) const {
      static constexpr char kHex[] = "0123456789ABCDEF";
      std::string out = "X'";
      for (unsigned char c : v) {
        out += kHex[c >> 4];
        out += kHex[c & 0xF];
      }
      return out + "'";
    }
  };
  return std::visit(Visitor{}, value);
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ValueCheck: return "value_check";
    case Stage::Syntax: return "syntax";
    case Stage::Execution: return "execution";
    case Stage::Semantic: return "semantic";
  }
  return "unknown";
}

std::string_view to_string(StageStatus status) {
  switch (status) {
    case StageStatus::Pass: return "pass";
    case StageStatus::Warn: return "warn";
    case StageStatus::Fail: return "fail";
  }
  return "unknown";
}

bool ValidationReport::failed() const {
  for (const auto& r : stage_results)
    if (r.status == StageStatus::Fail) return true;
  return false;
}

StageResult validate_semantics(const ExecutionOutcome& outcome, const DecompositionPlan& plan,
                               const std::string& sql_text) {
  StageResult result{Stage::Semantic, StageStatus::Pass, {}};
  std::vector<std::string> warnings;
  const std::size_t expected = plan.output_spec.columns.size();
  if (outcome.column_names.size() != expected) {
    result.status = StageStatus::Fail;
    result.messages.push_back("result has " + std::to_string(outcome.column_names.size()) +
                              " columns but the plan expects " + std::to_string(expected));
  }
  if (outcome.rows.empty()) warnings.push_back("empty result");
  try {
    const bool has_agg = sql::has_aggregate(sql::parse_select(sql_text));
    if (plan.expects_aggregate() && !has_agg) {
      warnings.push_back("aggregation mismatch: the plan expects an aggregate but the query has none");
    } else if (!plan.expects_aggregate() && has_agg) {
      warnings.push_back("aggregation mismatch: the query aggregates but the plan expects plain rows");
    }
  } catch (const sql::SyntaxError&) {
    // syntax stage already reported it
  }
  if (outcome.truncated) {
    warnings.push_back("result truncated at " + std::to_string(outcome.rows.size()) + " rows");
  }
  result.messages.insert(result.messages.end(), warnings.begin(), warnings.end());
  if (result.status == StageStatus::Pass && !warnings.empty()) result.status = StageStatus::Warn;
  return result;
}

namespace {

Rejected reject(ValidationReport report, const std::string& failed_sql) {
  DiagnosticBundle bundle;
  bundle.failed_sql = failed_sql;
  for (const auto& r : report.stage_results) {
    if (r.status == StageStatus::Fail) {
      bundle.execution_errors.insert(bundle.execution_errors.end(), r.messages.begin(), r.messages.end());
    } else if (r.status == StageStatus::Warn) {
      bundle.validation_warnings.insert(bundle.validation_warnings.end(), r.messages.begin(), r.messages.end());
    }
  }
  if (bundle.empty()) bundle.execution_errors.push_back("candidate rejected");
  return Rejected{std::move(bundle), std::move(report)};
}

}  // namespace

Verdict validate_full(const std::string& sql_text, const SchemaContext& context, const DecompositionPlan& plan,
                      const std::filesystem::path& db_file, const ValidationPolicy& policy) {
  ValidationReport report;
  std::string candidate = sql_text;
  try {
    AutocorrectResult corrected = autocorrect_values(sql_text, context.evidence);
    StageResult value_check{Stage::ValueCheck, StageStatus::Pass, {}};
    for (const auto& c : corrected.corrections) {
      value_check.messages.push_back("corrected '" + c.original_literal + "' to '" + c.corrected_literal +
                                     "' for " + c.table + "." + c.column);
    }
    if (!corrected.corrections.empty()) value_check.status = StageStatus::Warn;
    report.stage_results.push_back(std::move(value_check));
    report.corrections = std::move(corrected.corrections);
    candidate = std::move(corrected.sql);

    StageResult syntax = validate_syntax(candidate, context.catalog);
    report.stage_results.push_back(syntax);
    if (syntax.status == StageStatus::Fail) return reject(std::move(report), candidate);

    SandboxResult run = execute_sandboxed(candidate, db_file, policy.limits);
    report.stage_results.push_back(run.stage);
    if (!run.outcome) return reject(std::move(report), candidate);

    StageResult semantic = validate_semantics(*run.outcome, plan, candidate);
    if (policy.strict_semantic && semantic.status == StageStatus::Warn) semantic.status = StageStatus::Fail;
    report.stage_results.push_back(semantic);
    if (semantic.status == StageStatus::Fail) return reject(std::move(report), candidate);

    return Accepted{std::move(candidate), std::move(*run.outcome), std::move(report)};
  } catch (const std::exception& e) {
    report.stage_results.push_back({Stage::Execution, StageStatus::Fail, {std::string("internal error: ") + e.what()}});
    return reject(std::move(report), candidate);
  }
}

}  // namespace nlsql
