#include <doctest.h>

#include "fixtures.hpp"
#include "nlsql/errors.hpp"
#include "nlsql/generator.hpp"

using namespace nlsql;

namespace {

struct Setup {
  testing::TempDir dir;
  std::filesystem::path db = testing::make_schools_db(dir.path());
  SchemaContext context = build_context(introspect_schema(db), {}, {}, {"q", "schools", {}});
  DecompositionPlan plan = parse_plan(testing::simple_plan({"schools.sname"}, {"schools.sname"}));
  Question question{"Name every school in the registry", "schools", {}};
};

BackendSpec primary_with(const std::string& key, const std::vector<std::string>& answers) {
  return scripted_backend(std::map<std::string, std::vector<std::string>>{{key, answers}}, Role::PrimaryGenerator,
                          "local");
}

BackendSpec fallback_with(std::map<std::string, std::vector<std::string>> fixtures) {
  auto b = scripted_backend(std::move(fixtures), Role::FallbackGenerator, "remote");
  b.pricing = {2.5, 10.0};
  return b;
}

Verdict reject_with(const std::string& sql, const std::string& error) {
  return Rejected{DiagnosticBundle{{error}, {}, sql}, {}};
}

Verdict accept(const std::string& sql) { return Accepted{sql, {}, {}}; }

}  // namespace

TEST_CASE("extract_sql prefers the first fenced block") {
  CHECK(extract_sql("Sure!\n```sql\nSELECT 1\n```\nand ```sql\nSELECT 2\n```") == "SELECT 1");
  CHECK(extract_sql("```\nSELECT 3;\n```") == "SELECT 3;");
  CHECK(extract_sql("  SELECT 4  \n") == "SELECT 4");
  CHECK(extract_sql("   ") == "");
}

TEST_CASE("generate_primary renders the plan and extracts SQL") {
  Setup s;
  auto b = primary_with(s.question.text, {testing::fenced_sql("SELECT sname FROM schools")});
  TokenUsage spent;
  const SqlCandidate c = generate_primary(s.question, s.plan, s.context, b, {}, {}, &spent);
  CHECK(c.sql == "SELECT sname FROM schools");
  CHECK(c.is_primary());
  CHECK(c.usage == spent);
  CHECK(c.usage.output_tokens == 6);  // the fence markers count too
}

TEST_CASE("generate_primary errors") {
  Setup s;
  CHECK_THROWS_AS(generate_primary(s.question, s.plan, s.context, fallback_with({{"x", {"y"}}})), ConfigError);
  auto empty = primary_with(s.question.text, {"```sql\n```"});
  TokenUsage spent;
  CHECK_THROWS_AS(generate_primary(s.question, s.plan, s.context, empty, {}, {}, &spent), GenerationError);
  CHECK(spent.input_tokens > 0);
}

TEST_CASE("generate_fallback quotes the bundle verbatim") {
  Setup s;
  const DiagnosticBundle bundle{{"unknown column nme in schools"}, {"empty result"}, "SELECT nme FROM schools"};
  PromptTemplates echo;
  echo.generator_fallback = "{question}|{failed_sql}|{errors}|{warnings}";
  const std::string expected_prompt =
      s.question.text + "|SELECT nme FROM schools|- unknown column nme in schools\n|- empty result\n";
  auto b = fallback_with({{expected_prompt, {testing::fenced_sql("SELECT sname FROM schools")}}});
  const SqlCandidate c = generate_fallback(s.question, s.plan, s.context, bundle, b, 2, echo);
  CHECK(c.sql == "SELECT sname FROM schools");
  CHECK(c.attempt == 2);
  CHECK(b.script->calls() == 1);

  const DiagnosticBundle no_sql{{"generation error: x"}, {}, ""};
  auto b2 = fallback_with({{s.question.text + "|(none)|- generation error: x\n|(none)", {"SELECT 1"}}});
  CHECK(generate_fallback(s.question, s.plan, s.context, no_sql, b2, 1, echo).sql == "SELECT 1");
}

TEST_CASE("generate_fallback argument checks") {
  Setup s;
  auto b = fallback_with({{"x", {"SELECT 1"}}});
  const DiagnosticBundle bundle{{"e"}, {}, "SELECT"};
  CHECK_THROWS_AS(generate_fallback(s.question, s.plan, s.context, bundle, b, 0), ValidationError);
  CHECK_THROWS_AS(generate_fallback(s.question, s.plan, s.context, bundle, b, 4), ValidationError);
  CHECK_THROWS_AS(generate_fallback(s.question, s.plan, s.context, DiagnosticBundle{}, b, 1), ValidationError);
  CHECK_THROWS_AS(generate_fallback(s.question, s.plan, s.context, bundle, primary_with("x", {"y"}), 1), ConfigError);
}

TEST_CASE("ladder accepts the primary candidate without touching the fallback") {
  Setup s;
  auto primary = primary_with(s.question.text, {"SELECT sname FROM schools"});
  auto fallback = fallback_with({{"x", {"SELECT 1"}}});
  const auto out = run_ladder(s.question, s.plan, s.context, primary, fallback, accept);
  CHECK_FALSE(out.failed());
  CHECK(out.route() == Route::LocalOnly);
  CHECK(out.attempts_used == 0);
  CHECK(out.bundle_history.empty());
  CHECK(fallback.script->calls() == 0);
  CHECK(out.fallback_usage == TokenUsage{});
}

TEST_CASE("ladder retries with the latest bundle and stops at acceptance") {
  Setup s;
  auto primary = primary_with(s.question.text, {"SELECT a"});
  // Each fallback prompt is keyed on the error of the previous candidate only.
  auto fallback = fallback_with({{"error of a", {"SELECT b"}}, {"error of b", {"SELECT c"}}});
  const CandidateValidator validator = [](const std::string& sql) {
    if (sql == "SELECT c") return accept(sql);
    return reject_with(sql, "error of " + sql.substr(7));
  };
  std::vector<int> generated;
  int rejections = 0;
  LadderObserver obs;
  obs.on_generated = [&](int attempt, const SqlCandidate* c) {
    CHECK(c != nullptr);
    generated.push_back(attempt);
  };
  obs.on_rejection = [&](const DiagnosticBundle&) { ++rejections; };
  const auto out = run_ladder(s.question, s.plan, s.context, primary, fallback, validator, {}, {}, obs);
  REQUIRE_FALSE(out.failed());
  CHECK(out.final_candidate->sql == "SELECT c");
  CHECK(out.final_candidate->attempt == 2);
  CHECK(out.route() == Route::FallbackUsed);
  CHECK(out.attempts_used == 2);
  CHECK(out.bundle_history.size() == 2);
  CHECK(generated == std::vector<int>{0, 1, 2});
  CHECK(rejections == 2);
  CHECK(out.fallback_usage.input_tokens > 0);
}

TEST_CASE("ladder gives up after three fallback attempts") {
  Setup s;
  auto primary = primary_with(s.question.text, {"SELECT bad"});
  auto fallback = fallback_with({{s.question.text, {"SELECT worse"}}});
  const auto out = run_ladder(s.question, s.plan, s.context, primary, fallback,
                              [](const std::string& sql) { return reject_with(sql, "nope"); });
  CHECK(out.failed());
  CHECK(out.route() == Route::Failed);
  CHECK(out.attempts_used == 3);
  CHECK(out.bundle_history.size() == 4);
  CHECK(fallback.script->calls() == 3);
  CHECK_FALSE(out.accepted);
}

TEST_CASE("generation errors become synthetic rejections") {
  Setup s;
  auto primary = primary_with(s.question.text, {"```sql\n```"});
  auto fallback = fallback_with({{"generation error", {"SELECT sname FROM schools"}}});
  std::vector<bool> had_candidate;
  LadderObserver obs;
  obs.on_generated = [&](int, const SqlCandidate* c) { had_candidate.push_back(c != nullptr); };
  const auto out = run_ladder(s.question, s.plan, s.context, primary, fallback, accept, {}, {}, obs);
  REQUIRE_FALSE(out.failed());
  REQUIRE(out.bundle_history.size() == 1);
  CHECK(out.bundle_history[0].execution_errors[0].rfind("generation error: ", 0) == 0);
  CHECK(had_candidate == std::vector<bool>{false, true});
}

TEST_CASE("ladder propagates configuration errors") {
  Setup s;
  auto wrong = fallback_with({{"x", {"y"}}});
  CHECK_THROWS_AS(run_ladder(s.question, s.plan, s.context, wrong, wrong, accept), ConfigError);
}

TEST_CASE("ladder with the real validator keeps the corrected SQL") {
  Setup s;
  s.context.evidence.entries.push_back({"Fresno County", "schools", "county", "Fresno"});
  auto primary = primary_with(s.question.text, {"SELECT sname FROM schools WHERE county = 'FRESNO'"});
  auto fallback = fallback_with({{"x", {"y"}}});
  const CandidateValidator validator = [&](const std::string& sql) {
    return validate_full(sql, s.context, s.plan, s.db);
  };
  const auto out = run_ladder(s.question, s.plan, s.context, primary, fallback, validator);
  REQUIRE_FALSE(out.failed());
  CHECK(out.final_candidate->sql == "SELECT sname FROM schools WHERE county = 'Fresno'");
  CHECK(out.accepted->outcome.rows.size() == 3);
}
