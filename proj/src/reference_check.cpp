#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "nlsql/sql.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

namespace {

using sql::Expr;
using sql::iequals;
using sql::Select;
using sql::SelectCore;
using sql::TableRef;
using sql::to_lower;

bool is_rowid_name(std::string_view name) {
  return iequals(name, "rowid") || iequals(name, "oid") || iequals(name, "_rowid_");
}

// A relation visible in a FROM clause. Unknown column lists (table-valued
// functions, recursive CTEs before their body resolves) accept any column.
struct Source {
  std::string visible;
  std::string display;
  std::vector<std::string> columns;
  bool columns_known = true;
  bool base_table = false;

  bool has(std::string_view column) const {
    if (!columns_known) return true;
    if (base_table && is_rowid_name(column)) return true;
    return std::any_of(columns.begin(), columns.end(), [&](const auto& c) { return iequals(c, column); });
  }
};

struct CteInfo {
  std::vector<std::string> columns;
  bool columns_known = true;
};

using CteMap = std::map<std::string, CteInfo>;  // lower-cased name

struct Scope {
  const Scope* parent = nullptr;
  std::vector<Source> sources;
  std::set<std::string> merged;          // lower-cased USING / NATURAL columns
  std::vector<std::string> output_aliases;
};

struct Output {
  std::vector<std::string> columns;
  bool known = true;
};

class Resolver {
 public:
  explicit Resolver(const SchemaCatalog& catalog) : catalog_(catalog) {}

  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  Output select(const Select& s, const Scope* parent, CteMap ctes) {
    for (const auto& cte : s.ctes) {
      const std::string key = to_lower(cte.name);
      if (s.recursive) ctes[key] = CteInfo{cte.columns, !cte.columns.empty()};
      Output out = select(*cte.select, parent, ctes);
      CteInfo info;
      if (!cte.columns.empty()) {
        if (out.known && out.columns.size() != cte.columns.size()) {
          errors.push_back("table " + cte.name + " has " + std::to_string(out.columns.size()) +
                           " values for " + std::to_string(cte.columns.size()) + " columns");
        }
        info.columns = cte.columns;
      } else {
        info.columns = out.columns;
        info.columns_known = out.known;
      }
      ctes[key] = info;
    }

    std::vector<Scope> scopes;
    scopes.reserve(s.cores.size());
    Output result;
    for (std::size_t i = 0; i < s.cores.size(); ++i) {
      scopes.emplace_back();
      Output out = core(s.cores[i], parent, ctes, scopes.back());
      if (i == 0) result = out;
    }

    for (const auto& term : s.order_by) order_term(term.expr, result, scopes, ctes);
    if (s.limit) expression(*s.limit, parent ? *parent : Scope{}, ctes);
    if (s.offset) expression(*s.offset, parent ? *parent : Scope{}, ctes);
    return result;
  }

 private:
  const SchemaCatalog& catalog_;

  Output core(const SelectCore& c, const Scope* parent, const CteMap& ctes, Scope& scope) {
    scope.parent = parent;
    Output out;
    if (c.is_values) {
      for (const auto& row : c.values)
        for (const auto& e : row) expression(e, scope, ctes);
      const std::size_t width = c.values.empty() ? 0 : c.values.front().size();
      for (std::size_t i = 1; i <= width; ++i) out.columns.push_back("column" + std::to_string(i));
      return out;
    }

    for (const auto& item : c.from) from_item(item, scope, parent, ctes);

    for (const auto& rc : c.columns) {
      if (rc.kind == sql::ResultColumn::Kind::Expression && !rc.alias.empty()) {
        scope.output_aliases.push_back(rc.alias);
      }
    }

    for (const auto& rc : c.columns) {
      switch (rc.kind) {
        case sql::ResultColumn::Kind::Expression:
          expression(rc.expr, scope, ctes);
          if (!rc.alias.empty()) {
            out.columns.push_back(rc.alias);
          } else if (rc.expr.kind == Expr::Kind::Column) {
            out.columns.push_back(rc.expr.name);
          } else {
            out.columns.push_back("expr" + std::to_string(out.columns.size() + 1));
          }
          break;
        case sql::ResultColumn::Kind::Star:
          if (scope.sources.empty()) errors.push_back("no tables specified");
          for (const auto& src : scope.sources) {
            out.known = out.known && src.columns_known;
            out.columns.insert(out.columns.end(), src.columns.begin(), src.columns.end());
          }
          break;
        case sql::ResultColumn::Kind::TableStar: {
          const Source* src = find_source(scope, rc.table);
          if (!src) {
            errors.push_back("no such table: " + rc.table);
          } else {
            out.known = out.known && src->columns_known;
            out.columns.insert(out.columns.end(), src->columns.begin(), src->columns.end());
          }
          break;
        }
      }
    }

    if (c.where) expression(*c.where, scope, ctes);
    for (const auto& e : c.group_by) expression(e, scope, ctes);
    if (c.having) expression(*c.having, scope, ctes);
    for (const auto& e : c.window_exprs) expression(e, scope, ctes);
    return out;
  }

  void from_item(const TableRef& item, Scope& scope, const Scope* parent, const CteMap& ctes) {
    const std::size_t before = scope.sources.size();
    switch (item.kind) {
      case TableRef::Kind::Table: {
        Source src;
        src.visible = item.visible_name();
        src.display = item.name;
        const auto cte = item.schema.empty() ? ctes.find(to_lower(item.name)) : ctes.end();
        if (cte != ctes.end()) {
          src.columns = cte->second.columns;
          src.columns_known = cte->second.columns_known;
        } else if (const TableInfo* t = catalog_.find_table(item.name)) {
          src.display = t->name;
          src.base_table = true;
          for (const auto& col : t->columns) src.columns.push_back(col.name);
        } else if (iequals(item.name, "sqlite_master") || iequals(item.name, "sqlite_schema")) {
          src.columns = {"type", "name", "tbl_name", "rootpage", "sql"};
          src.base_table = true;
        } else {
          errors.push_back("unknown table " + item.name);
          src.columns_known = false;
        }
        scope.sources.push_back(std::move(src));
        break;
      }
      case TableRef::Kind::Subquery: {
        Output out = select(*item.subquery, parent, ctes);
        Source src;
        src.visible = item.alias;
        src.display = item.alias.empty() ? std::string("subquery") : item.alias;
        src.columns = std::move(out.columns);
        src.columns_known = out.known;
        scope.sources.push_back(std::move(src));
        break;
      }
      case TableRef::Kind::Group:
        for (const auto& inner : item.group) from_item(inner, scope, parent, ctes);
        break;
      case TableRef::Kind::Function: {
        for (const auto& e : item.function_args) expression(e, scope, ctes);
        Source src;
        src.visible = item.visible_name();
        src.display = item.name;
        src.columns_known = false;
        scope.sources.push_back(std::move(src));
        break;
      }
    }

    if (item.op == TableRef::JoinOp::Join && !item.natural && !item.on && !item.has_using &&
        !iequals(item.join_type, "CROSS")) {
      warnings.push_back("JOIN without ON or USING: " +
                         (item.visible_name().empty() ? std::string("subquery") : item.visible_name()));
    }
    if (item.has_using) {
      for (const auto& col : item.using_columns) {
        bool left = false;
        bool right = false;
        for (std::size_t i = 0; i < scope.sources.size(); ++i) {
          (i < before ? left : right) |= scope.sources[i].has(col);
        }
        if (!left || !right) errors.push_back("cannot join using column " + col + " - column not present in both tables");
        scope.merged.insert(to_lower(col));
      }
    }
    if (item.natural) {
      for (std::size_t i = before; i < scope.sources.size(); ++i) {
        for (const auto& col : scope.sources[i].columns) {
          for (std::size_t j = 0; j < before; ++j) {
            if (scope.sources[j].has(col)) scope.merged.insert(to_lower(col));
          }
        }
      }
    }
    if (item.on) expression(*item.on, scope, ctes);
  }

  static const Source* find_source(const Scope& scope, std::string_view name) {
    for (const auto& src : scope.sources) {
      if (!src.visible.empty() && iequals(src.visible, name)) return &src;
    }
    return nullptr;
  }

  static std::string scope_tables(const Scope& scope) {
    std::string out;
    for (const auto& src : scope.sources) {
      if (!out.empty()) out += ", ";
      out += src.display;
    }
    return out;
  }

  void column(const Expr& e, const Scope& scope, bool allow_aliases) {
    if (!e.table.empty()) {
      for (const Scope* s = &scope; s; s = s->parent) {
        if (const Source* src = find_source(*s, e.table)) {
          if (!src->has(e.name)) errors.push_back("unknown column " + e.name + " in " + src->display);
          return;
        }
      }
      errors.push_back("unknown table " + e.table + " in " + e.table + "." + e.name);
      return;
    }
    for (const Scope* s = &scope; s; s = s->parent) {
      std::size_t known_hits = 0;
      bool open_hit = false;
      for (const auto& src : s->sources) {
        if (!src.columns_known) {
          open_hit = true;
        } else if (src.has(e.name)) {
          ++known_hits;
        }
      }
      if (known_hits > 1 && !s->merged.count(to_lower(e.name)) && !is_rowid_name(e.name)) {
        errors.push_back("ambiguous column " + e.name);
        return;
      }
      if (known_hits > 0 || open_hit) return;
      if (allow_aliases || s != &scope) {
        for (const auto& alias : s->output_aliases)
          if (iequals(alias, e.name)) return;
      }
    }
    if (e.double_quoted) {
      warnings.push_back("\"" + e.name + "\" is not a column and is read as a string literal");
      return;
    }
    if (scope.sources.empty()) {
      errors.push_back("unknown column " + e.name);
    } else {
      errors.push_back("unknown column " + e.name + " in " + scope_tables(scope));
    }
  }

  void expression(const Expr& root, const Scope& scope, const CteMap& ctes, bool allow_aliases = true) {
    sql::visit(root, [&](const Expr& e) {
      if (e.kind == Expr::Kind::Column) column(e, scope, allow_aliases);
      if (e.subquery) select(*e.subquery, &scope, ctes);
    });
  }

  void order_term(const Expr& e, const Output& result, std::vector<Scope>& scopes, const CteMap& ctes) {
    if (e.kind == Expr::Kind::Literal) return;
    if (e.kind == Expr::Kind::Column && e.table.empty()) {
      for (const auto& c : result.columns)
        if (iequals(c, e.name)) return;
    }
    // Resolve against the last core's scope; earlier cores of a compound
    // are tried before reporting, since SQLite matches any of them.
    const std::size_t saved = errors.size();
    const std::size_t saved_warnings = warnings.size();
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      errors.resize(saved);
      warnings.resize(saved_warnings);
      expression(e, *it, ctes);
      if (errors.size() == saved) return;
    }
  }
};

}  // namespace

StageResult validate_syntax(const std::string& sql_text, const SchemaCatalog& catalog) {
  StageResult result{Stage::Syntax, StageStatus::Pass, {}};
  sql::ParsedSql parsed;
  try {
    parsed = sql::parse_sql(sql_text);
  } catch (const sql::SyntaxError& e) {
    result.status = StageStatus::Fail;
    result.messages.push_back(e.what());
    return result;
  }
  if (parsed.statement_count == 0) {
    result.status = StageStatus::Fail;
    result.messages.push_back("empty statement");
    return result;
  }
  if (parsed.statement_count > 1) {
    result.status = StageStatus::Fail;
    result.messages.push_back("multiple statements");
    return result;
  }
  if (parsed.kind != sql::StatementKind::Select) {
    result.status = StageStatus::Fail;
    result.messages.push_back("only SELECT statements are allowed, got " + parsed.leading_keyword);
    return result;
  }

  Resolver resolver(catalog);
  resolver.select(*parsed.select, nullptr, {});
  if (!resolver.errors.empty()) {
    result.status = StageStatus::Fail;
    result.messages = std::move(resolver.errors);
  } else if (!resolver.warnings.empty()) {
    result.status = StageStatus::Warn;
    result.messages = std::move(resolver.warnings);
  }
  return result;
}

}  // namespace nlsql
