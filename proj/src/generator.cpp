#include <algorithm>

#include "nlsql/errors.hpp"
#include "nlsql/generator.hpp"

namespace nlsql {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string bullet_list(const std::vector<std::string>& items) {
  if (items.empty()) return "(none)\n";
  std::string out;
  for (const auto& item : items) out += "- " + item + "\n";
  return out;
}

void require_role(const BackendSpec& backend, Role role) {
  if (backend.role != role) {
    throw ConfigError("backend " + backend.name + " is bound to role " + std::string(to_string(backend.role)) +
                      ", not " + std::string(to_string(role)));
  }
}

SqlCandidate run_generation(const BackendSpec& backend, const std::string& prompt, const GenerationParams& params,
                            int attempt, TokenUsage* spent) {
  SqlCandidate candidate;
  candidate.attempt = attempt;
  int calls = 0;
  struct UsageReport {
    const TokenUsage& usage;
    TokenUsage* sink;
    ~UsageReport() {
      if (sink) *sink += usage;
    }
  } report{candidate.usage, spent};
  const Completion c = complete_with_retry(backend, prompt, params, candidate.usage, calls);
  candidate.sql = extract_sql(c.text);
  if (candidate.sql.empty()) throw GenerationError("backend " + backend.name + " returned an empty completion");
  return candidate;
}

std::map<std::string, std::string> base_values(const Question& question, const DecompositionPlan& plan,
                                               const SchemaContext& context) {
  return {{"question", question.text},
          {"plan", serialize_plan(plan)},
          {"catalog", context.catalog.summary()},
          {"segments", render_segments(context)},
          {"evidence", render_evidence(context, question.evidence_hint.value_or(""))}};
}

}  // namespace

std::string extract_sql(std::string_view completion) {
  const auto open = completion.find("```");
  if (open != std::string_view::npos) {
    const auto body = completion.find('\n', open);
    if (body != std::string_view::npos) {
      const auto close = completion.find("```", body + 1);
      if (close != std::string_view::npos) return trim(completion.substr(body + 1, close - body - 1));
    }
  }
  return trim(completion);
}

SqlCandidate generate_primary(const Question& question, const DecompositionPlan& plan, const SchemaContext& context,
                              const BackendSpec& backend, const PromptTemplates& prompts,
                              const GenerationParams& params, TokenUsage* spent) {
  require_role(backend, Role::PrimaryGenerator);
  const std::string prompt = render_template(prompts.generator_primary, base_values(question, plan, context));
  return run_generation(backend, prompt, params, 0, spent);
}

SqlCandidate generate_fallback(const Question& question, const DecompositionPlan& plan, const SchemaContext& context,
                               const DiagnosticBundle& bundle, const BackendSpec& backend, int attempt,
                               const PromptTemplates& prompts, const GenerationParams& params, TokenUsage* spent) {
  require_role(backend, Role::FallbackGenerator);
  if (attempt < 1 || attempt > kMaxFallbackAttempts) {
    throw ValidationError("fallback attempt " + std::to_string(attempt) + " outside 1.." +
                          std::to_string(kMaxFallbackAttempts));
  }
  if (bundle.empty()) throw ValidationError("diagnostic bundle has neither errors nor warnings");
  auto values = base_values(question, plan, context);
  values["failed_sql"] = bundle.failed_sql.empty() ? std::string("(none)") : bundle.failed_sql;
  values["errors"] = bullet_list(bundle.execution_errors);
  values["warnings"] = bullet_list(bundle.validation_warnings);
  const std::string prompt = render_template(prompts.generator_fallback, values);
  return run_generation(backend, prompt, params, attempt, spent);
}

Route GenerationOutcome::route() const {
  if (failed()) return Route::Failed;
  return attempts_used == 0 ? Route::LocalOnly : Route::FallbackUsed;
}

GenerationOutcome run_ladder(const Question& question, const DecompositionPlan& plan, const SchemaContext& context,
                             const BackendSpec& primary, const BackendSpec& fallback,
                             const CandidateValidator& validator, const PromptTemplates& prompts,
                             const GenerationParams& params, const LadderObserver& observer) {
  GenerationOutcome outcome;
  outcome.bundle_history.reserve(kMaxFallbackAttempts + 1);
  const DiagnosticBundle* latest = nullptr;

  for (int attempt = 0; attempt <= kMaxFallbackAttempts; ++attempt) {
    if (attempt > 0) outcome.attempts_used = attempt;
    TokenUsage& sink = attempt == 0 ? outcome.primary_usage : outcome.fallback_usage;
    std::optional<SqlCandidate> candidate;
    DiagnosticBundle bundle;
    try {
      candidate = attempt == 0
                      ? generate_primary(question, plan, context, primary, prompts, params, &sink)
                      : generate_fallback(question, plan, context, *latest, fallback, attempt, prompts, params, &sink);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      bundle.execution_errors.push_back(std::string("generation error: ") + e.what());
      if (latest) bundle.failed_sql = latest->failed_sql;
    }

    if (observer.on_generated) observer.on_generated(attempt, candidate ? &*candidate : nullptr);
    if (candidate) {
      Verdict verdict = validator(candidate->sql);
      if (auto* accepted = std::get_if<Accepted>(&verdict)) {
        candidate->sql = accepted->sql;
        outcome.final_candidate = std::move(*candidate);
        outcome.accepted = std::move(*accepted);
        return outcome;
      }
      bundle = std::move(std::get<Rejected>(verdict).bundle);
    }
    if (observer.on_rejection) observer.on_rejection(bundle);
    outcome.bundle_history.push_back(std::move(bundle));
    latest = &outcome.bundle_history.back();
  }
  return outcome;
}

}  // namespace nlsql
