#include "nlsql/pipeline.hpp"

#include "nlsql/errors.hpp"

namespace nlsql {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::string_view event_name(const StageEvent& event) {
  return std::visit(Overloaded{
                        [](const CreatedEvent&) { return "created"; },
                        [](const ExtractedEvent&) { return "extracted"; },
                        [](const DecomposedEvent&) { return "decomposed"; },
                        [](const GeneratedEvent&) { return "generated"; },
                        [](const FallbackRetryEvent&) { return "fallback_retry"; },
                        [](const ValidatedEvent&) { return "validated"; },
                        [](const DoneEvent&) { return "done"; },
                        [](const FailedEvent&) { return "failed"; },
                    },
                    event);
}

[[noreturn]] void illegal(const PipelineState& state, const StageEvent& event) {
  throw StateMachineError("illegal transition: " + std::string(event_name(event)) + " event in stage " +
                          std::string(to_string(state.stage)));
}

PipelineState apply(const PipelineState& state, StageEvent event, Timestamp at) {
  PipelineState next = state;
  const PipelineStage stage = state.stage;
  std::visit(Overloaded{
                 [&](const CreatedEvent&) { illegal(state, event); },
                 [&](const ExtractedEvent& e) {
                   if (stage != PipelineStage::Created) illegal(state, event);
                   next.stage = PipelineStage::Extracted;
                   next.schema_context = e.context;
                 },
                 [&](const DecomposedEvent& e) {
                   if (stage != PipelineStage::Extracted) illegal(state, event);
                   next.stage = PipelineStage::Decomposed;
                   next.plan = e.plan;
                 },
                 [&](const GeneratedEvent& e) {
                   if (stage != PipelineStage::Decomposed) illegal(state, event);
                   if (!e.candidate.is_primary()) illegal(state, event);
                   next.stage = PipelineStage::Generated;
                   next.candidate = e.candidate;
                 },
                 [&](const FallbackRetryEvent& e) {
                   // Decomposed is allowed when the primary produced no SQL at all.
                   if (stage != PipelineStage::Generated && stage != PipelineStage::Decomposed) illegal(state, event);
                   if (state.attempts >= kMaxFallbackAttempts) illegal(state, event);
                   next.stage = PipelineStage::Generated;
                   next.attempts = state.attempts + 1;
                   next.bundles.push_back(e.bundle);
                   if (e.candidate) next.candidate = e.candidate;
                 },
                 [&](const ValidatedEvent& e) {
                   if (stage != PipelineStage::Generated) illegal(state, event);
                   next.stage = PipelineStage::Validated;
                   next.accepted = e.accepted;
                 },
                 [&](const DoneEvent&) {
                   if (stage != PipelineStage::Validated) illegal(state, event);
                   next.stage = PipelineStage::Done;
                 },
                 [&](const FailedEvent& e) {
                   if (stage == PipelineStage::Done || stage == PipelineStage::Failed) illegal(state, event);
                   next.stage = PipelineStage::Failed;
                   next.failure = e.reason;
                 },
             },
             event);
  next.trace.push_back({std::move(event), at});
  return next;
}

}  // namespace

std::string_view to_string(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::Created: return "created";
    case PipelineStage::Extracted: return "extracted";
    case PipelineStage::Decomposed: return "decomposed";
    case PipelineStage::Generated: return "generated";
    case PipelineStage::Validated: return "validated";
    case PipelineStage::Done: return "done";
    case PipelineStage::Failed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(PipelineOutcome outcome) {
  switch (outcome) {
    case PipelineOutcome::Success: return "success";
    case PipelineOutcome::GenerationFailure: return "generation_failure";
    case PipelineOutcome::ExtractionFailure: return "extraction_failure";
    case PipelineOutcome::DecompositionFailure: return "decomposition_failure";
  }
  return "unknown";
}

Timestamp system_now() { return std::chrono::system_clock::now(); }

PipelineState new_pipeline(const Question& question, const DatabaseRegistry& registry, const PipelineClock& clock) {
  if (question.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("question text is empty");
  }
  if (question.db_id.empty()) throw ValidationError("question has no db_id");
  if (!registry.contains(question.db_id)) {
    throw ConfigError("unknown database '" + question.db_id + "' under " + registry.root().string());
  }
  PipelineState state;
  state.question = question;
  state.trace.push_back({CreatedEvent{question}, clock()});
  return state;
}

PipelineState advance(const PipelineState& state, StageEvent event, const PipelineClock& clock) {
  return apply(state, std::move(event), clock());
}

PipelineState replay(const std::vector<TraceEntry>& trace) {
  if (trace.empty()) throw StateMachineError("empty trace");
  const auto* created = std::get_if<CreatedEvent>(&trace.front().event);
  if (!created) throw StateMachineError("trace does not start with a creation event");
  PipelineState state;
  state.question = created->question;
  state.trace.push_back(trace.front());
  for (std::size_t i = 1; i < trace.size(); ++i) state = apply(state, trace[i].event, trace[i].at);
  return state;
}

namespace {

PipelineResult finish(PipelineResult result, PipelineState state, CostLedger& ledger, const std::string& query_id) {
  result.cost = ledger.close_query(query_id, result.route).cost;
  result.state = std::move(state);
  return result;
}

void charge(PipelineResult& result, CostLedger& ledger, const std::string& query_id, const BackendSpec& backend,
            const TokenUsage& usage) {
  if (usage == TokenUsage{}) return;
  ledger.record_usage(query_id, backend, usage);
  result.usage[backend.name] += usage;
}

}  // namespace

PipelineResult run_pipeline(const Question& question, const DatabaseResources& resources,
                            const PipelineBackends& backends, const PipelineOptions& options, CostLedger& ledger,
                            const std::string& query_id) {
  const PipelineClock& clock = options.clock;
  PipelineResult result;
  PipelineState state;
  state.question = question;
  state.trace.push_back({CreatedEvent{question}, clock()});

  try {
    state = advance(state, ExtractedEvent{extract_context(question, resources, backends.embedder, options.retrieval)},
                    clock);
  } catch (const std::exception& e) {
    result.outcome = PipelineOutcome::ExtractionFailure;
    result.error = std::string("extraction failed: ") + e.what();
    state = advance(state, FailedEvent{result.error}, clock);
    return finish(std::move(result), std::move(state), ledger, query_id);
  }
  const SchemaContext ctx = *state.schema_context;

  TokenUsage decomposer_usage;
  try {
    Decomposition d = decompose(question, ctx, backends.decomposer, options.prompts, options.generation,
                                &decomposer_usage);
    charge(result, ledger, query_id, backends.decomposer, decomposer_usage);
    state = advance(state, DecomposedEvent{std::move(d.plan)}, clock);
  } catch (const std::exception& e) {
    charge(result, ledger, query_id, backends.decomposer, decomposer_usage);
    result.outcome = PipelineOutcome::DecompositionFailure;
    result.error = std::string("decomposition failed: ") + e.what();
    state = advance(state, FailedEvent{result.error}, clock);
    return finish(std::move(result), std::move(state), ledger, query_id);
  }
  const DecompositionPlan plan = *state.plan;

  LadderObserver observer;
  const DiagnosticBundle* last_bundle = nullptr;
  std::vector<DiagnosticBundle> seen;
  seen.reserve(kMaxFallbackAttempts + 1);
  observer.on_rejection = [&](const DiagnosticBundle& b) {
    seen.push_back(b);
    last_bundle = &seen.back();
  };
  observer.on_generated = [&](int attempt, const SqlCandidate* candidate) {
    if (attempt == 0) {
      if (candidate) state = advance(state, GeneratedEvent{*candidate}, clock);
      return;
    }
    FallbackRetryEvent event{*last_bundle, std::nullopt};
    if (candidate) event.candidate = *candidate;
    state = advance(state, std::move(event), clock);
  };
  const CandidateValidator validator = [&](const std::string& sql) {
    return validate_full(sql, ctx, plan, resources.db_file, options.validation);
  };

  GenerationOutcome gen;
  try {
    gen = run_ladder(question, plan, ctx, backends.primary, backends.fallback, validator, options.prompts,
                     options.generation, observer);
  } catch (const std::exception& e) {
    // Only misconfiguration escapes the ladder.
    result.outcome = PipelineOutcome::GenerationFailure;
    result.error = std::string("generation failed: ") + e.what();
    state = advance(state, FailedEvent{result.error}, clock);
    return finish(std::move(result), std::move(state), ledger, query_id);
  }
  charge(result, ledger, query_id, backends.primary, gen.primary_usage);
  charge(result, ledger, query_id, backends.fallback, gen.fallback_usage);
  result.fallback_attempts = gen.attempts_used;
  result.bundle_history = gen.bundle_history;
  result.route = gen.route();

  if (gen.accepted) {
    state = advance(state, ValidatedEvent{*gen.accepted}, clock);
    state = advance(state, DoneEvent{}, clock);
    result.outcome = PipelineOutcome::Success;
    result.sql = gen.accepted->sql;
    result.rows = gen.accepted->outcome;
    result.report = gen.accepted->report;
  } else {
    result.outcome = PipelineOutcome::GenerationFailure;
    result.error = "generation failure after " + std::to_string(kMaxFallbackAttempts) + " attempts";
    state = advance(state, FailedEvent{result.error}, clock);
  }
  return finish(std::move(result), std::move(state), ledger, query_id);
}

PipelineResult run_pipeline(const Question& question, const DatabaseRegistry& registry,
                            const PipelineBackends& backends, const PipelineOptions& options, CostLedger& ledger,
                            const std::string& query_id) {
  DatabaseResources resources;
  try {
    resources = load_database_resources(registry, question.db_id, backends.embedder);
  } catch (const std::exception& e) {
    PipelineResult result;
    result.outcome = PipelineOutcome::ExtractionFailure;
    result.error = std::string("extraction failed: ") + e.what();
    PipelineState state;
    state.question = question;
    state.trace.push_back({CreatedEvent{question}, options.clock()});
    state = advance(state, FailedEvent{result.error}, options.clock);
    return finish(std::move(result), std::move(state), ledger, query_id);
  }
  return run_pipeline(question, resources, backends, options, ledger, query_id);
}

}  // namespace nlsql
