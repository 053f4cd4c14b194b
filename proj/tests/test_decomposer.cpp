#include <doctest.h>

#include "fixtures.hpp"
#include "nlsql/decomposer.hpp"
#include "nlsql/errors.hpp"

using namespace nlsql;

namespace {

const char* kPlan = R"(Here is the plan.
```plan
ENTITIES
charter schools	schools.charter	Y means charter
math score	satscores.avgscrmath	-
excellence rate	expr:CAST(satscores.numge1500 AS REAL) / satscores.numtsttakr	ratio
CONDITIONS
c1	charter schools	schools.charter = 'Y'	no
c2	above average	avgscrmath > (SELECT AVG(avgscrmath) FROM satscores)	yes
STEPS
s1	join schools to satscores	-	-
s2	filter charter schools above average	s1	c1,c2
OUTPUT
column	schools.sname
column	AVG(satscores.avgscrmath)
order	AVG(satscores.avgscrmath) DESC
limit	3
```
trailing chatter)";

std::string error_of(const std::string& raw, const SchemaCatalog* cat = nullptr) {
  try {
    parse_plan(raw, cat);
  } catch (const PlanParseError& e) {
    CHECK(e.raw() == raw);
    return e.what();
  }
  return "";
}

std::string body(const std::string& entities, const std::string& conditions, const std::string& steps,
                 const std::string& output) {
  return "ENTITIES\n" + entities + "CONDITIONS\n" + conditions + "STEPS\n" + steps + "OUTPUT\n" + output;
}

}  // namespace

TEST_CASE("a full plan parses") {
  const DecompositionPlan p = parse_plan(kPlan);
  REQUIRE(p.entities.size() == 3);
  CHECK(p.entities[0].table == "schools");
  CHECK(p.entities[0].column == "charter");
  CHECK(p.entities[2].is_computed());
  CHECK(p.entities[2].expression == "CAST(satscores.numge1500 AS REAL) / satscores.numtsttakr");
  REQUIRE(p.conditions.size() == 2);
  CHECK(p.conditions[1].requires_subquery);
  REQUIRE(p.steps.size() == 2);
  CHECK(p.steps[1].depends_on == std::vector<std::string>{"s1"});
  CHECK(p.steps[1].conditions == std::vector<std::string>{"c1", "c2"});
  CHECK(p.output_spec.columns.size() == 2);
  CHECK(p.output_spec.ordering == "AVG(satscores.avgscrmath) DESC");
  CHECK(p.output_spec.limit == 3);
  CHECK(p.expects_aggregate());
}

TEST_CASE("serialize_plan is the inverse of parse_plan") {
  DecompositionPlan p = parse_plan(kPlan);
  p.entities[1].note = "tab\there, newline\nthere, backslash \\ too";
  const std::string text = serialize_plan(p);
  CHECK(text.rfind("```plan\n", 0) == 0);
  CHECK(parse_plan(text) == p);
}

TEST_CASE("bindings are checked against the catalog") {
  testing::TempDir dir;
  const SchemaCatalog cat = introspect_schema(testing::make_schools_db(dir.path()));
  CHECK_NOTHROW(parse_plan(kPlan, &cat));
  const std::string bad = body("x\tschools.nope\t-\n", "", "s1\td\t-\t-\n", "column\tx\n");
  CHECK(error_of(bad, &cat) == "entities[0].binding: unknown column schools.nope");
  const std::string bad_expr = body("x\texpr:satscores.bogus * 2\t-\n", "", "s1\td\t-\t-\n", "column\tx\n");
  CHECK(error_of(bad_expr, &cat) == "entities[0].binding: unknown column satscores.bogus");
  CHECK(error_of(bad) == "");
}

TEST_CASE("malformed plans name the offending field") {
  const std::string steps = "s1\td\t-\t-\n";
  const std::string out = "column\tx\n";
  CHECK(error_of("nothing here").rfind("entities: ", 0) == 0);
  CHECK(error_of(body("x\tnodot\t-\n", "", steps, out)).rfind("entities[0].binding: ", 0) == 0);
  CHECK(error_of(body("", "c1\tp\tq\tmaybe\n", steps, out)).rfind("conditions[0].requires_subquery: ", 0) == 0);
  CHECK(error_of(body("", "c1\tp\tq\tno\nc1\tp\tq\tno\n", steps, out)) ==
        "conditions[1].id: duplicate id 'c1'");
  CHECK(error_of(body("", "", "", out)) == "steps: at least one step is required");
  CHECK(error_of(body("", "", "s1\td\ts9\t-\n", out)) == "steps[0].depends_on: unknown step 's9'");
  CHECK(error_of(body("", "", "s1\td\t-\tc7\n", out)) == "steps[0].conditions: unknown condition 'c7'");
  CHECK(error_of(body("", "c1\tp\tq\tyes\n", steps, out)) ==
        "conditions[0]: subquery condition 'c1' is not applied by any step");
  CHECK(error_of(body("", "", "s1\td\ts2\t-\ns2\td\ts1\t-\n", out)) ==
        "steps: dependency cycle s1 -> s2 -> s1");
  CHECK(error_of(body("", "", steps, "")) == "output_spec.columns: at least one output column is required");
  CHECK(error_of(body("", "", steps, "column\tx\nlimit\tmany\n")).rfind("output_spec.limit: ", 0) == 0);
  CHECK(error_of(body("", "", steps, "colour\tx\n")) == "output_spec: unknown key 'colour'");
  CHECK(error_of("ENTITIES\nCONDITIONS\nSTEPS\ns1\td\t-\t-\n").find("missing OUTPUT section") != std::string::npos);
}

TEST_CASE("expects_aggregate looks only at output columns") {
  auto p = parse_plan(body("", "", "s1\td\t-\t-\n", "column\tschools.sname\n"));
  CHECK_FALSE(p.expects_aggregate());
  p.output_spec.columns.push_back("count(*)");
  CHECK(p.expects_aggregate());
}

TEST_CASE("decompose calls the backend and re-prompts once on a parse error") {
  testing::TempDir dir;
  const SchemaCatalog cat = introspect_schema(testing::make_schools_db(dir.path()));
  const SchemaContext ctx = build_context(cat, {}, {}, {"q", "schools", {}});
  const Question q{"Which charter schools score highest?", "schools", {}};

  auto good = scripted_backend(std::map<std::string, std::string>{{q.text, kPlan}}, Role::Decomposer, "d");
  TokenUsage spent;
  const Decomposition d = decompose(q, ctx, good, {}, {}, &spent);
  CHECK(d.calls == 1);
  CHECK(d.plan.entities.size() == 3);
  CHECK(d.usage.output_tokens > 0);
  CHECK(spent == d.usage);

  auto flaky = scripted_backend(
      std::map<std::string, std::string>{{q.text, "no plan at all"}, {"Your previous answer could not be parsed: entities", kPlan}},
      Role::Decomposer, "d");
  const Decomposition d2 = decompose(q, ctx, flaky);
  CHECK(d2.calls == 2);
  CHECK(d2.plan == d.plan);

  auto broken = scripted_backend(std::map<std::string, std::string>{{q.text, "no plan at all"}},
                                 Role::Decomposer, "d");
  TokenUsage spent2;
  CHECK_THROWS_AS(decompose(q, ctx, broken, {}, {}, &spent2), PlanParseError);
  CHECK(spent2.input_tokens > 0);

  auto wrong_role = scripted_backend(std::map<std::string, std::string>{{q.text, kPlan}});
  CHECK_THROWS_AS(decompose(q, ctx, wrong_role), ConfigError);
}
