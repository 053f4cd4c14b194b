#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nlsql/decomposer.hpp"
#include "nlsql/gateway.hpp"
#include "nlsql/generator.hpp"
#include "nlsql/prompts.hpp"
#include "nlsql/question.hpp"
#include "nlsql/schema.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

/// Monotone except for fallback re-entry into Generated. Failed is reachable
/// from every non-terminal stage.
enum class PipelineStage { Created, Extracted, Decomposed, Generated, Validated, Done, Failed };

std::string_view to_string(PipelineStage stage);

struct CreatedEvent {
  Question question;
  friend bool operator==(const CreatedEvent&, const CreatedEvent&) = default;
};
struct ExtractedEvent {
  SchemaContext context;
  friend bool operator==(const ExtractedEvent&, const ExtractedEvent&) = default;
};
struct DecomposedEvent {
  DecompositionPlan plan;
  friend bool operator==(const DecomposedEvent&, const DecomposedEvent&) = default;
};
struct GeneratedEvent {
  SqlCandidate candidate;
  friend bool operator==(const GeneratedEvent&, const GeneratedEvent&) = default;
};
/// One fallback attempt: the bundle that triggered it and the candidate it
/// produced, absent when generation itself failed.
struct FallbackRetryEvent {
  DiagnosticBundle bundle;
  std::optional<SqlCandidate> candidate;
  friend bool operator==(const FallbackRetryEvent&, const FallbackRetryEvent&) = default;
};
struct ValidatedEvent {
  Accepted accepted;
  friend bool operator==(const ValidatedEvent&, const ValidatedEvent&) = default;
};
struct DoneEvent {
  friend bool operator==(const DoneEvent&, const DoneEvent&) = default;
};
struct FailedEvent {
  std::string reason;
  friend bool operator==(const FailedEvent&, const FailedEvent&) = default;
};

using StageEvent = std::variant<CreatedEvent, ExtractedEvent, DecomposedEvent, GeneratedEvent, FallbackRetryEvent,
                                ValidatedEvent, DoneEvent, FailedEvent>;

using Timestamp = std::chrono::system_clock::time_point;
using PipelineClock = std::function<Timestamp()>;

struct TraceEntry {
  StageEvent event;
  Timestamp at;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

/// Immutable value threaded through the stages; advance() returns a new one.
struct PipelineState {
  Question question;
  PipelineStage stage = PipelineStage::Created;
  std::optional<SchemaContext> schema_context;
  std::optional<DecompositionPlan> plan;
  std::optional<SqlCandidate> candidate;
  std::optional<Accepted> accepted;
  int attempts = 0;  // fallback attempts, never above 3
  std::vector<DiagnosticBundle> bundles;
  std::optional<std::string> failure;
  std::vector<TraceEntry> trace;  // trace[0] is the creation event

  friend bool operator==(const PipelineState&, const PipelineState&) = default;
};

Timestamp system_now();

/// Throws ValidationError on empty text or db_id, ConfigError when db_id is
/// not in `registry`.
PipelineState new_pipeline(const Question& question, const DatabaseRegistry& registry,
                           const PipelineClock& clock = system_now);

/// Applies one event. Throws StateMachineError on an illegal transition.
PipelineState advance(const PipelineState& state, StageEvent event, const PipelineClock& clock = system_now);

/// Rebuilds a state from its trace, timestamps included.
PipelineState replay(const std::vector<TraceEntry>& trace);

enum class PipelineOutcome { Success, GenerationFailure, ExtractionFailure, DecompositionFailure };

std::string_view to_string(PipelineOutcome outcome);

struct PipelineResult {
  PipelineOutcome outcome = PipelineOutcome::GenerationFailure;
  std::optional<std::string> sql;
  std::optional<ExecutionOutcome> rows;
  Route route = Route::Failed;
  int fallback_attempts = 0;
  std::map<std::string, TokenUsage> usage;  // per backend name
  Money cost;
  std::vector<DiagnosticBundle> bundle_history;
  std::optional<ValidationReport> report;
  std::string error;  // set unless Success
  PipelineState state;
};

struct PipelineBackends {
  BackendSpec decomposer;
  BackendSpec primary;
  BackendSpec fallback;
  BackendSpec embedder;
};

struct PipelineOptions {
  RetrievalConfig retrieval;
  ValidationPolicy validation;
  GenerationParams generation;
  PromptTemplates prompts;
  PipelineClock clock = system_now;
};

/// Runs extract -> decompose -> generate/validate ladder for one question.
/// Never throws for model or SQL problems; they become the outcome. Usage is
/// recorded in `ledger` under `query_id`, which is then closed.
PipelineResult run_pipeline(const Question& question, const DatabaseResources& resources,
                            const PipelineBackends& backends, const PipelineOptions& options,
                            CostLedger& ledger, const std::string& query_id);

/// Same, loading the database first; a database that cannot be introspected
/// yields ExtractionFailure.
PipelineResult run_pipeline(const Question& question, const DatabaseRegistry& registry,
                            const PipelineBackends& backends, const PipelineOptions& options,
                            CostLedger& ledger, const std::string& query_id);

}  // namespace nlsql
