#include <doctest.h>

#include <memory>

#include "fixtures.hpp"
#include "nlsql/errors.hpp"
#include "nlsql/pipeline.hpp"

using namespace nlsql;

namespace {

// Deterministic clock: each call advances one second from the epoch.
PipelineClock ticking_clock() {
  auto n = std::make_shared<int>(0);
  return [n] { return Timestamp{} + std::chrono::seconds(++*n); };
}

const std::string kQuestion = "List the names of charter schools";
const std::string kPlan = testing::simple_plan({"schools.sname"}, {"schools.sname", "schools.charter"});

struct Fixture {
  testing::TempDir dir;
  std::filesystem::path db = testing::make_schools_db(dir.path());
  DatabaseRegistry registry{dir.path()};
  PipelineOptions options;
  CostLedger ledger;

  Fixture() { options.clock = ticking_clock(); }

  PipelineResult run(const PipelineBackends& b, const std::string& question = kQuestion) {
    return run_pipeline({question, "schools", {}}, registry, b, options, ledger, "q1");
  }
};

PipelineBackends backends(std::vector<std::string> primary, std::vector<std::string> fallback) {
  return testing::scripted_backends({{kQuestion, {kPlan}}}, {{kQuestion, std::move(primary)}},
                                    {{kQuestion, std::move(fallback)}});
}

}  // namespace

TEST_CASE("new_pipeline validates the question") {
  Fixture f;
  CHECK_THROWS_AS(new_pipeline({"  ", "schools", {}}, f.registry), ValidationError);
  CHECK_THROWS_AS(new_pipeline({"q", "", {}}, f.registry), ValidationError);
  CHECK_THROWS_AS(new_pipeline({"q", "nope", {}}, f.registry), ConfigError);
  const auto s = new_pipeline({"q", "schools", {}}, f.registry, f.options.clock);
  CHECK(s.stage == PipelineStage::Created);
  REQUIRE(s.trace.size() == 1);
  CHECK(s.trace[0].at == Timestamp{} + std::chrono::seconds(1));
}

TEST_CASE("advance enforces the stage order") {
  Fixture f;
  const auto clock = f.options.clock;
  const auto s0 = new_pipeline({"q", "schools", {}}, f.registry, clock);
  CHECK_THROWS_AS(advance(s0, DecomposedEvent{}, clock), StateMachineError);
  CHECK_THROWS_AS(advance(s0, DoneEvent{}, clock), StateMachineError);
  CHECK_THROWS_AS(advance(s0, CreatedEvent{}, clock), StateMachineError);
  const auto s1 = advance(s0, ExtractedEvent{}, clock);
  CHECK(s0.stage == PipelineStage::Created);  // states are values
  CHECK(s1.stage == PipelineStage::Extracted);
  const auto s2 = advance(s1, DecomposedEvent{parse_plan(kPlan)}, clock);
  CHECK_THROWS_AS(advance(s2, GeneratedEvent{SqlCandidate{"SELECT 1", 1, {}}}, clock), StateMachineError);
  const auto s3 = advance(s2, GeneratedEvent{SqlCandidate{"SELECT 1", 0, {}}}, clock);
  CHECK_THROWS_AS(advance(s3, DoneEvent{}, clock), StateMachineError);
  const auto s4 = advance(s3, ValidatedEvent{}, clock);
  const auto s5 = advance(s4, DoneEvent{}, clock);
  CHECK(s5.stage == PipelineStage::Done);
  CHECK_THROWS_AS(advance(s5, FailedEvent{"late"}, clock), StateMachineError);
  CHECK(advance(s2, FailedEvent{"x"}, clock).failure == "x");
}

TEST_CASE("fallback retries are capped at three") {
  Fixture f;
  const auto clock = f.options.clock;
  auto s = new_pipeline({"q", "schools", {}}, f.registry, clock);
  s = advance(s, ExtractedEvent{}, clock);
  s = advance(s, DecomposedEvent{}, clock);
  s = advance(s, FallbackRetryEvent{DiagnosticBundle{{"generation error: empty"}, {}, ""}, std::nullopt}, clock);
  for (int i = 2; i <= 3; ++i) {
    s = advance(s, FallbackRetryEvent{DiagnosticBundle{{"e"}, {}, "SELECT"}, SqlCandidate{"SELECT", i, {}}}, clock);
  }
  CHECK(s.attempts == 3);
  CHECK(s.bundles.size() == 3);
  CHECK_THROWS_AS(advance(s, FallbackRetryEvent{DiagnosticBundle{{"e"}, {}, ""}, std::nullopt}, clock),
                  StateMachineError);
}

TEST_CASE("a local success") {
  Fixture f;
  const auto r = f.run(backends({testing::fenced_sql("SELECT sname FROM schools WHERE charter = 'y'")}, {"unused"}));
  REQUIRE(r.outcome == PipelineOutcome::Success);
  CHECK(r.route == Route::LocalOnly);
  CHECK(r.sql == "SELECT sname FROM schools WHERE charter = 'Y'");
  CHECK(r.rows->rows.size() == 3);
  CHECK(r.fallback_attempts == 0);
  CHECK(r.cost == Money{});
  CHECK(r.usage.count("local-decomposer") == 1);
  CHECK(r.usage.count("local-generator") == 1);
  CHECK(r.usage.count("remote-generator") == 0);
  CHECK(r.state.stage == PipelineStage::Done);
  CHECK(r.report->corrections.size() == 1);
  CHECK(f.ledger.per_query().at(0).route == Route::LocalOnly);
}

TEST_CASE("a fallback success is charged to the remote backend") {
  Fixture f;
  const auto r = f.run(backends({"SELECT nme FROM schools"}, {"SELECT sname FROM schools WHERE charter = 'Y'"}));
  REQUIRE(r.outcome == PipelineOutcome::Success);
  CHECK(r.route == Route::FallbackUsed);
  CHECK(r.fallback_attempts == 1);
  REQUIRE(r.bundle_history.size() == 1);
  CHECK(r.bundle_history[0].execution_errors[0] == "unknown column nme in schools");
  const TokenUsage remote = r.usage.at("remote-generator");
  CHECK(r.cost == Pricing{2.5, 10.0}.cost(remote));
  CHECK(r.cost > Money{});
  CHECK(f.ledger.total() == r.cost);
}

TEST_CASE("a generation failure after three fallback attempts") {
  Fixture f;
  const auto r = f.run(backends({"SELECT nme FROM schools"}, {"SELECT still_wrong FROM schools"}));
  CHECK(r.outcome == PipelineOutcome::GenerationFailure);
  CHECK(r.route == Route::Failed);
  CHECK(r.fallback_attempts == 3);
  CHECK(r.bundle_history.size() == 4);
  CHECK(r.error == "generation failure after 3 attempts");
  CHECK(r.state.stage == PipelineStage::Failed);
  CHECK(r.state.attempts == 3);
  CHECK_FALSE(r.sql);
}

TEST_CASE("an empty primary completion goes straight to the fallback") {
  Fixture f;
  const auto r = f.run(backends({"```sql\n```"}, {"SELECT sname FROM schools"}));
  REQUIRE(r.outcome == PipelineOutcome::Success);
  CHECK(r.route == Route::FallbackUsed);
  CHECK(r.state.trace.size() == 6);  // created extracted decomposed retry validated done
}

TEST_CASE("decomposition and extraction failures") {
  Fixture f;
  auto b = testing::scripted_backends({{kQuestion, {"not a plan"}}}, {{kQuestion, {"SELECT 1"}}},
                                      {{kQuestion, {"SELECT 1"}}});
  const auto r = f.run(b);
  CHECK(r.outcome == PipelineOutcome::DecompositionFailure);
  CHECK(r.error.rfind("decomposition failed: ", 0) == 0);
  CHECK(r.usage.at("local-decomposer").input_tokens > 0);

  testing::write_text(f.db, std::string(4096, 'x'));
  const auto broken = f.run(b);
  CHECK(broken.outcome == PipelineOutcome::ExtractionFailure);
  CHECK(broken.state.stage == PipelineStage::Failed);
}

TEST_CASE("replay rebuilds the final state from the trace") {
  Fixture f;
  const auto r = f.run(backends({"SELECT nme FROM schools"}, {"SELECT bad1 FROM schools", "SELECT sname FROM schools"}));
  REQUIRE(r.outcome == PipelineOutcome::Success);
  CHECK(r.fallback_attempts == 2);
  const PipelineState rebuilt = replay(r.state.trace);
  CHECK(rebuilt == r.state);
  for (std::size_t i = 1; i < r.state.trace.size(); ++i) CHECK(r.state.trace[i - 1].at < r.state.trace[i].at);
  CHECK_THROWS_AS(replay({}), StateMachineError);
  CHECK_THROWS_AS(replay({TraceEntry{DoneEvent{}, {}}}), StateMachineError);
}

TEST_CASE("strict semantic policy sends warnings to the fallback") {
  Fixture f;
  f.options.validation.strict_semantic = true;
  const auto r = f.run(backends({"SELECT sname FROM schools WHERE county = 'Kern'"}, {"SELECT sname FROM schools"}));
  REQUIRE(r.outcome == PipelineOutcome::Success);
  CHECK(r.route == Route::FallbackUsed);
  CHECK(r.bundle_history[0].execution_errors == std::vector<std::string>{"empty result"});
}
