#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlsql/gateway.hpp"
#include "nlsql/prompts.hpp"
#include "nlsql/question.hpp"
#include "nlsql/schema.hpp"

namespace nlsql {

/// A phrase of the question linked to a column, or to a computed expression
/// over columns (binding text "expr:<sql expression>").
struct EntityBinding {
  std::string nl_phrase;
  std::string table;
  std::string column;
  std::string expression;  // non-empty for computed bindings
  std::string note;

  bool is_computed() const { return !expression.empty(); }
  friend bool operator==(const EntityBinding&, const EntityBinding&) = default;
};

struct PlanCondition {
  std::string id;
  std::string nl_phrase;
  std::string predicate;
  bool requires_subquery = false;

  friend bool operator==(const PlanCondition&, const PlanCondition&) = default;
};

struct PlanStep {
  std::string step_id;
  std::string description;
  std::vector<std::string> depends_on;
  std::vector<std::string> conditions;  // ids of conditions this step applies

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct OutputSpec {
  std::vector<std::string> columns;
  std::optional<std::string> ordering;
  std::optional<std::int64_t> limit;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct DecompositionPlan {
  std::vector<EntityBinding> entities;
  std::vector<PlanCondition> conditions;
  std::vector<PlanStep> steps;
  OutputSpec output_spec;

  /// True when any output column is an aggregate expression.
  bool expects_aggregate() const;
  friend bool operator==(const DecompositionPlan&, const DecompositionPlan&) = default;
};

/// Parses the line-oriented plan format:
///
///     ENTITIES
///     <phrase> \t <table.column | expr:EXPR> \t <note>
///     CONDITIONS
///     <id> \t <phrase> \t <predicate> \t <yes|no>
///     STEPS
///     <id> \t <description> \t <depends_on ids | -> \t <condition ids | ->
///     OUTPUT
///     column \t <expr>        (one or more)
///     order \t <expr>         (optional)
///     limit \t <n>            (optional)
///
/// optionally inside a ``` fence. Fields escape tab, newline and backslash as
/// \t, \n and \\. When `catalog` is given, every binding must resolve in it.
/// Throws PlanParseError whose message starts with the offending field path.
DecompositionPlan parse_plan(const std::string& raw, const SchemaCatalog* catalog = nullptr);

/// Inverse of parse_plan; output is wrapped in a ```plan fence.
std::string serialize_plan(const DecompositionPlan& plan);

struct Decomposition {
  DecompositionPlan plan;
  TokenUsage usage;  // summed over every call made, retries included
  int calls = 0;
};

/// Asks the decomposer backend for a plan. Transport errors are retried once;
/// an unparseable plan is re-prompted once with the parse error appended.
/// Tokens spent are added to `*spent` (when given) even if an error escapes.
Decomposition decompose(const Question& question, const SchemaContext& context,
                        const BackendSpec& backend, const PromptTemplates& prompts = {},
                        const GenerationParams& params = {}, TokenUsage* spent = nullptr);

}  // namespace nlsql
