#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlsql/decomposer.hpp"
#include "nlsql/gateway.hpp"
#include "nlsql/prompts.hpp"
#include "nlsql/question.hpp"
#include "nlsql/schema.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

inline constexpr int kMaxFallbackAttempts = 3;

struct SqlCandidate {
  std::string sql;
  int attempt = 0;  // 0 for the primary candidate, 1..3 for fallback attempts
  TokenUsage usage;

  bool is_primary() const { return attempt == 0; }
  friend bool operator==(const SqlCandidate&, const SqlCandidate&) = default;
};

/// SQL from the first fenced code block, or the whole completion trimmed.
std::string extract_sql(std::string_view completion);

/// Throws ConfigError on a backend bound to another role, GenerationError on
/// an empty completion and TransportError when the one retry also fails.
/// Tokens spent are added to `*spent` even when an error escapes.
SqlCandidate generate_primary(const Question& question, const DecompositionPlan& plan,
                              const SchemaContext& context, const BackendSpec& backend,
                              const PromptTemplates& prompts = {}, const GenerationParams& params = {},
                              TokenUsage* spent = nullptr);

/// The prompt quotes the question, the failed SQL and every error and warning
/// of `bundle` verbatim. Throws ValidationError when `attempt` is outside
/// 1..3 or the bundle has neither errors nor warnings.
SqlCandidate generate_fallback(const Question& question, const DecompositionPlan& plan,
                               const SchemaContext& context, const DiagnosticBundle& bundle,
                               const BackendSpec& backend, int attempt, const PromptTemplates& prompts = {},
                               const GenerationParams& params = {}, TokenUsage* spent = nullptr);

/// Validates one candidate SQL text; normally binds validate_full.
using CandidateValidator = std::function<Verdict(const std::string& sql)>;

/// Optional hooks fired as the ladder progresses.
struct LadderObserver {
  // After each generation call; `candidate` is null when generation failed.
  std::function<void(int attempt, const SqlCandidate* candidate)> on_generated;
  std::function<void(const DiagnosticBundle&)> on_rejection;
};

struct GenerationOutcome {
  std::optional<SqlCandidate> final_candidate;  // empty on generation failure
  std::optional<Accepted> accepted;             // set with final_candidate
  int attempts_used = 0;                        // fallback attempts, 0..3
  std::vector<DiagnosticBundle> bundle_history; // one per rejection
  TokenUsage primary_usage;
  TokenUsage fallback_usage;

  bool failed() const { return !final_candidate.has_value(); }
  Route route() const;
};

/// Primary candidate first, then fallback attempts 1, 2, 3 until one is
/// accepted. Each fallback prompt sees only the latest bundle. Generation
/// errors count as rejections with a synthetic bundle.
GenerationOutcome run_ladder(const Question& question, const DecompositionPlan& plan,
                             const SchemaContext& context, const BackendSpec& primary,
                             const BackendSpec& fallback, const CandidateValidator& validator,
                             const PromptTemplates& prompts = {}, const GenerationParams& params = {},
                             const LadderObserver& observer = {});

}  // namespace nlsql
