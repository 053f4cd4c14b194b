#include "nlsql/decomposer.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "nlsql/errors.hpp"
#include "nlsql/sql.hpp"

namespace nlsql {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[i + 1];
      if (n == '\\' || n == 't' || n == 'n') {
        out += n == '\\' ? '\\' : (n == 't' ? '\t' : '\n');
        ++i;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(trim(unescape_field(std::string_view(line).substr(start, tab - start))));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::string> split_ids(const std::string& field) {
  std::vector<std::string> out;
  if (field.empty() || field == "-") return out;
  std::stringstream in(field);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  if (ids.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += ids[i];
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    std::string line(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool is_fence(const std::string& line) { return trim(line).rfind("```", 0) == 0; }

// Lines of the first fenced block that contains an ENTITIES header, or every
// line when no such block exists.
std::vector<std::string> plan_lines(const std::string& raw) {
  auto lines = split_lines(raw);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_fence(lines[i])) continue;
    std::size_t j = i + 1;
    while (j < lines.size() && !is_fence(lines[j])) ++j;
    std::vector<std::string> body(lines.begin() + static_cast<std::ptrdiff_t>(i + 1),
                                  lines.begin() + static_cast<std::ptrdiff_t>(j));
    if (std::any_of(body.begin(), body.end(), [](const std::string& l) { return trim(l) == "ENTITIES"; })) {
      return body;
    }
    i = j;
  }
  return lines;
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::none_of(id.begin(), id.end(), [](unsigned char c) {
    return c == ',' || std::isspace(c);
  });
}

class PlanParser {
 public:
  PlanParser(const std::string& raw, const SchemaCatalog* catalog) : raw_(raw), catalog_(catalog) {}

  DecompositionPlan parse() {
    enum class Section { None, Entities, Conditions, Steps, Output };
    static const std::vector<std::pair<std::string, Section>> kHeaders = {
        {"ENTITIES", Section::Entities},
        {"CONDITIONS", Section::Conditions},
        {"STEPS", Section::Steps},
        {"OUTPUT", Section::Output}};
    Section current = Section::None;
    std::set<Section> seen;
    std::vector<std::string> output_lines;
    DecompositionPlan plan;

    for (const auto& line : plan_lines(raw_)) {
      const std::string t = trim(line);
      if (t.empty()) continue;
      auto header = std::find_if(kHeaders.begin(), kHeaders.end(), [&](const auto& h) { return h.first == t; });
      if (header != kHeaders.end()) {
        if (seen.count(header->second) || header->second < current) {
          fail(path_of(header->second), "section " + t + " is repeated or out of order");
        }
        current = header->second;
        seen.insert(current);
        continue;
      }
      switch (current) {
        case Section::None: fail("entities", "unexpected text before ENTITIES: '" + t + "'");
        case Section::Entities: plan.entities.push_back(entity(line, plan.entities.size())); break;
        case Section::Conditions: plan.conditions.push_back(condition(line, plan.conditions.size())); break;
        case Section::Steps: plan.steps.push_back(step(line, plan.steps.size())); break;
        case Section::Output: output_lines.push_back(line); break;
      }
    }
    for (const auto& [name, section] : kHeaders) {
      if (!seen.count(section)) fail(path_of(section), "missing " + name + " section");
    }
    plan.output_spec = output(output_lines);
    check_references(plan);
    return plan;
  }

 private:
  const std::string& raw_;
  const SchemaCatalog* catalog_;

  template <typename S>
  static std::string path_of(S section) {
    switch (static_cast<int>(section)) {
      case 1: return "entities";
      case 2: return "conditions";
      case 3: return "steps";
      case 4: return "output_spec";
      default: return "plan";
    }
  }

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw PlanParseError(path + ": " + message, raw_);
  }

  static std::string at(const std::string& base, std::size_t i, const char* field = nullptr) {
    std::string p = base + "[" + std::to_string(i) + "]";
    if (field) p += std::string(".") + field;
    return p;
  }

  EntityBinding entity(const std::string& line, std::size_t i) {
    auto f = split_fields(line);
    if (f.size() < 2 || f.size() > 3) fail(at("entities", i), "expected 3 tab-separated fields");
    EntityBinding e;
    e.nl_phrase = f[0];
    if (e.nl_phrase.empty()) fail(at("entities", i, "nl_phrase"), "empty");
    const std::string& binding = f[1];
    if (binding.rfind("expr:", 0) == 0) {
      e.expression = trim(binding.substr(5));
      if (e.expression.empty()) fail(at("entities", i, "binding"), "empty computed expression");
      check_expression(e.expression, at("entities", i, "binding"));
    } else {
      const auto dot = binding.find('.');
      if (dot == std::string::npos || dot == 0 || dot + 1 == binding.size()) {
        fail(at("entities", i, "binding"), "expected table.column or expr:<expression>, got '" + binding + "'");
      }
      e.table = binding.substr(0, dot);
      e.column = binding.substr(dot + 1);
      if (catalog_ && !catalog_->has_column(e.table, e.column)) {
        fail(at("entities", i, "binding"), "unknown column " + e.table + "." + e.column);
      }
    }
    if (f.size() == 3) e.note = f[2];
    return e;
  }

  void check_expression(const std::string& expression, const std::string& path) const {
    if (!catalog_) return;
    sql::Expr parsed;
    try {
      parsed = sql::parse_expression(expression);
    } catch (const sql::SyntaxError& e) {
      fail(path, std::string("cannot parse expression: ") + e.what());
    }
    for (const sql::Expr* ref : sql::column_refs(parsed)) {
      if (!ref->table.empty()) {
        if (!catalog_->has_column(ref->table, ref->name)) {
          fail(path, "unknown column " + ref->table + "." + ref->name);
        }
        continue;
      }
      const bool found = std::any_of(catalog_->tables.begin(), catalog_->tables.end(),
                                     [&](const TableInfo& t) { return t.find_column(ref->name) != nullptr; });
      if (!found && !ref->double_quoted) fail(path, "unknown column " + ref->name);
    }
  }

  PlanCondition condition(const std::string& line, std::size_t i) {
    auto f = split_fields(line);
    if (f.size() != 4) fail(at("conditions", i), "expected 4 tab-separated fields");
    PlanCondition c;
    c.id = f[0];
    if (!valid_id(c.id)) fail(at("conditions", i, "id"), "invalid id '" + c.id + "'");
    c.nl_phrase = f[1];
    c.predicate = f[2];
    const std::string flag = sql::to_lower(f[3]);
    if (flag == "yes" || flag == "true") {
      c.requires_subquery = true;
    } else if (flag != "no" && flag != "false") {
      fail(at("conditions", i, "requires_subquery"), "expected yes or no, got '" + f[3] + "'");
    }
    return c;
  }

  PlanStep step(const std::string& line, std::size_t i) {
    auto f = split_fields(line);
    if (f.size() < 3 || f.size() > 4) fail(at("steps", i), "expected 4 tab-separated fields");
    PlanStep s;
    s.step_id = f[0];
    if (!valid_id(s.step_id)) fail(at("steps", i, "step_id"), "invalid id '" + s.step_id + "'");
    s.description = f[1];
    s.depends_on = split_ids(f[2]);
    if (f.size() == 4) s.conditions = split_ids(f[3]);
    return s;
  }

  OutputSpec output(const std::vector<std::string>& lines) {
    OutputSpec spec;
    for (const auto& line : lines) {
      auto f = split_fields(line);
      if (f.size() != 2) fail("output_spec", "expected key<TAB>value, got '" + trim(line) + "'");
      const std::string key = sql::to_lower(f[0]);
      if (key == "column") {
        if (f[1].empty()) fail("output_spec.columns", "empty column");
        spec.columns.push_back(f[1]);
      } else if (key == "order") {
        if (spec.ordering) fail("output_spec.ordering", "given twice");
        spec.ordering = f[1];
      } else if (key == "limit") {
        if (spec.limit) fail("output_spec.limit", "given twice");
        try {
          std::size_t used = 0;
          const long long v = std::stoll(f[1], &used);
          if (used != f[1].size() || v < 0) throw std::invalid_argument("limit");
          spec.limit = v;
        } catch (const std::exception&) {
          fail("output_spec.limit", "expected a non-negative integer, got '" + f[1] + "'");
        }
      } else {
        fail("output_spec", "unknown key '" + f[0] + "'");
      }
    }
    if (spec.columns.empty()) fail("output_spec.columns", "at least one output column is required");
    return spec;
  }

  void check_references(const DecompositionPlan& plan) const {
    std::map<std::string, std::size_t> cond_index;
    for (std::size_t i = 0; i < plan.conditions.size(); ++i) {
      if (!cond_index.emplace(plan.conditions[i].id, i).second) {
        fail(at("conditions", i, "id"), "duplicate id '" + plan.conditions[i].id + "'");
      }
    }
    if (plan.steps.empty()) fail("steps", "at least one step is required");
    std::map<std::string, std::size_t> step_index;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
      if (!step_index.emplace(plan.steps[i].step_id, i).second) {
        fail(at("steps", i, "step_id"), "duplicate id '" + plan.steps[i].step_id + "'");
      }
    }
    std::set<std::string> used_conditions;
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
      for (const auto& dep : plan.steps[i].depends_on) {
        if (!step_index.count(dep)) fail(at("steps", i, "depends_on"), "unknown step '" + dep + "'");
      }
      for (const auto& c : plan.steps[i].conditions) {
        if (!cond_index.count(c)) fail(at("steps", i, "conditions"), "unknown condition '" + c + "'");
        used_conditions.insert(c);
      }
    }
    for (std::size_t i = 0; i < plan.conditions.size(); ++i) {
      const auto& c = plan.conditions[i];
      if (c.requires_subquery && !used_conditions.count(c.id)) {
        fail(at("conditions", i), "subquery condition '" + c.id + "' is not applied by any step");
      }
    }
    check_acyclic(plan, step_index);
  }

  void check_acyclic(const DecompositionPlan& plan, const std::map<std::string, std::size_t>& index) const {
    enum class Mark { White, Grey, Black };
    std::vector<Mark> mark(plan.steps.size(), Mark::White);
    std::vector<std::string> stack;
    std::function<void(std::size_t)> dfs = [&](std::size_t v) {
      mark[v] = Mark::Grey;
      stack.push_back(plan.steps[v].step_id);
      for (const auto& dep : plan.steps[v].depends_on) {
        const std::size_t w = index.at(dep);
        if (mark[w] == Mark::Grey) {
          auto from = std::find(stack.begin(), stack.end(), dep);
          std::string cycle;
          for (auto it = from; it != stack.end(); ++it) cycle += *it + " -> ";
          fail("steps", "dependency cycle " + cycle + dep);
        }
        if (mark[w] == Mark::White) dfs(w);
      }
      stack.pop_back();
      mark[v] = Mark::Black;
    };
    for (std::size_t v = 0; v < plan.steps.size(); ++v) {
      if (mark[v] == Mark::White) dfs(v);
    }
  }
};

}  // namespace

bool DecompositionPlan::expects_aggregate() const {
  for (const auto& col : output_spec.columns) {
    try {
      if (sql::is_aggregate_expr(sql::parse_expression(col))) return true;
    } catch (const sql::SyntaxError&) {
      const std::string up = sql::to_lower(col);
      for (const char* fn : {"count(", "sum(", "avg(", "min(", "max("}) {
        if (up.find(fn) != std::string::npos) return true;
      }
    }
  }
  return false;
}

DecompositionPlan parse_plan(const std::string& raw, const SchemaCatalog* catalog) {
  return PlanParser(raw, catalog).parse();
}

std::string serialize_plan(const DecompositionPlan& plan) {
  std::ostringstream out;
  out << "```plan\nENTITIES\n";
  for (const auto& e : plan.entities) {
    out << escape_field(e.nl_phrase) << '\t'
        << (e.is_computed() ? "expr:" + escape_field(e.expression) : escape_field(e.table + "." + e.column))
        << '\t' << escape_field(e.note) << '\n';
  }
  out << "CONDITIONS\n";
  for (const auto& c : plan.conditions) {
    out << escape_field(c.id) << '\t' << escape_field(c.nl_phrase) << '\t' << escape_field(c.predicate) << '\t'
        << (c.requires_subquery ? "yes" : "no") << '\n';
  }
  out << "STEPS\n";
  for (const auto& s : plan.steps) {
    out << escape_field(s.step_id) << '\t' << escape_field(s.description) << '\t' << join_ids(s.depends_on)
        << '\t' << join_ids(s.conditions) << '\n';
  }
  out << "OUTPUT\n";
  for (const auto& c : plan.output_spec.columns) out << "column\t" << escape_field(c) << '\n';
  if (plan.output_spec.ordering) out << "order\t" << escape_field(*plan.output_spec.ordering) << '\n';
  if (plan.output_spec.limit) out << "limit\t" << *plan.output_spec.limit << '\n';
  out << "```\n";
  return out.str();
}

Decomposition decompose(const Question& question, const SchemaContext& context, const BackendSpec& backend,
                        const PromptTemplates& prompts, const GenerationParams& params, TokenUsage* spent) {
  if (backend.role != Role::Decomposer) {
    throw ConfigError("backend " + backend.name + " is bound to role " + std::string(to_string(backend.role)) +
                      ", not decomposer");
  }
  const std::string prompt =
      render_template(prompts.decomposer, {{"catalog", context.catalog.summary()},
                                           {"segments", render_segments(context)},
                                           {"evidence", render_evidence(context, question.evidence_hint.value_or(""))},
                                           {"question", question.text}});
  Decomposition out;
  // Report usage to the caller even when a parse or transport error escapes.
  struct UsageReport {
    const TokenUsage& usage;
    TokenUsage* sink;
    ~UsageReport() {
      if (sink) *sink += usage;
    }
  } report{out.usage, spent};
  const Completion first = complete_with_retry(backend, prompt, params, out.usage, out.calls);
  try {
    out.plan = parse_plan(first.text, &context.catalog);
    return out;
  } catch (const PlanParseError& e) {
    const std::string retry_prompt = prompt + "\n\nYour previous answer could not be parsed: " + e.what() +
                                     "\nPrevious answer:\n" + first.text +
                                     "\nAnswer again using exactly the requested format.\n";
    const Completion second = complete_with_retry(backend, retry_prompt, params, out.usage, out.calls);
    out.plan = parse_plan(second.text, &context.catalog);
    return out;
  }
}

}  // namespace nlsql
