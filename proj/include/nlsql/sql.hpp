#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlsql/errors.hpp"

// Lexer and parser for the SELECT subset of the SQLite dialect: enough to
// resolve table and column references, find string literals in predicates and
// detect aggregates or a top-level ORDER BY.
namespace nlsql::sql {

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset)
      : Error(message), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

enum class TokenKind {
  Word,        // bare or quoted identifier / keyword
  String,      // 'single quoted'
  Number,
  Blob,        // X'...'
  Parameter,   // ? ?1 :name @name $name
  Operator,
  LParen,
  RParen,
  Comma,
  Dot,
  Semicolon,
  End,
};

struct Token {
  TokenKind kind = TokenKind::End;
  std::string value;       // unquoted text for words and strings
  std::size_t offset = 0;  // byte offset in the source
  std::size_t length = 0;  // byte length in the source, quotes included
  char quote = 0;          // '"', '`', '[' for quoted words, '\'' for strings

  bool is_word() const { return kind == TokenKind::Word; }
  bool is_bare_word() const { return kind == TokenKind::Word && quote == 0; }
  /// Case-insensitive match of an unquoted word.
  bool is_keyword(std::string_view kw) const;
  bool is_op(std::string_view op) const { return kind == TokenKind::Operator && value == op; }
};

/// Tokenizes SQL text. Comments are dropped; the final token is End.
std::vector<Token> tokenize(std::string_view sql);

/// Escapes a value as a single-quoted SQL string literal.
std::string quote_literal(std::string_view value);

/// Keywords that can never be a bare identifier or implicit alias.
bool is_reserved(const Token& t);

bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

struct Select;

struct Expr {
  enum class Kind {
    Literal,    // text = literal source, e.g. 'Y', 42, NULL
    Parameter,
    Column,     // table (optional qualifier) + name
    Function,   // name + args; window/filter expressions in extra
    Unary,      // op + args[0]
    Binary,     // op + args[0], args[1]
    Between,    // args = {value, low, high}
    In,         // args[0] IN (args[1..]) or subquery
    Like,       // op = LIKE/GLOB/REGEXP/MATCH; args = {value, pattern[, escape]}
    IsNull,     // args[0] IS NULL (negated: IS NOT NULL)
    Case,       // args = [operand?] when/then pairs [else]; see has_operand/has_else
    Cast,       // args[0], text = type name
    Subquery,   // scalar subquery
    Exists,
    Row,        // (a, b, ...)
    Collate,    // args[0], text = collation
  };

  Kind kind = Kind::Literal;
  std::string text;   // literal text, operator, function name, type or collation
  std::string table;  // Column qualifier
  std::string name;   // Column name
  bool negated = false;
  bool distinct = false;      // DISTINCT inside an aggregate call
  bool star_arg = false;      // COUNT(*)
  bool double_quoted = false; // Column spelled "like this"
  bool has_operand = false;   // CASE x WHEN ...
  bool has_else = false;
  std::size_t offset = 0;
  std::vector<Expr> args;
  std::vector<Expr> extra;  // FILTER / OVER expressions
  std::shared_ptr<const Select> subquery;
};

struct ResultColumn {
  enum class Kind { Expression, Star, TableStar };
  Kind kind = Kind::Expression;
  Expr expr;
  std::string table;  // TableStar qualifier
  std::string alias;
};

struct TableRef {
  enum class Kind { Table, Subquery, Group, Function };
  enum class JoinOp { First, Comma, Join };

  Kind kind = Kind::Table;
  std::string schema;
  std::string name;
  std::string alias;
  std::shared_ptr<const Select> subquery;
  std::vector<TableRef> group;  // parenthesized join
  std::vector<Expr> function_args;

  // How this item is joined to the items before it.
  JoinOp op = JoinOp::First;
  std::string join_type;  // "", LEFT, RIGHT, FULL, INNER, CROSS
  bool natural = false;
  std::optional<Expr> on;
  std::vector<std::string> using_columns;
  bool has_using = false;
  std::size_t offset = 0;

  /// Name visible to column qualifiers.
  const std::string& visible_name() const { return alias.empty() ? name : alias; }
};

struct SelectCore {
  bool distinct = false;
  bool is_values = false;
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Expr>> values;
  std::vector<TableRef> from;
  std::optional<Expr> where;
  std::vector<Expr> group_by;
  std::optional<Expr> having;
  std::vector<Expr> window_exprs;  // named WINDOW definitions
};

struct OrderingTerm {
  Expr expr;
  bool descending = false;
};

struct Cte {
  std::string name;
  std::vector<std::string> columns;
  std::shared_ptr<const Select> select;
};

struct Select {
  bool recursive = false;
  std::vector<Cte> ctes;
  std::vector<SelectCore> cores;        // at least one
  std::vector<std::string> compounds;   // UNION, UNION ALL, INTERSECT, EXCEPT; size = cores-1
  std::vector<OrderingTerm> order_by;
  std::optional<Expr> limit;
  std::optional<Expr> offset;
};

enum class StatementKind { Empty, Select, Other };

struct ParsedSql {
  StatementKind kind = StatementKind::Empty;
  std::string leading_keyword;  // upper-cased first word, e.g. SELECT, INSERT
  std::size_t statement_count = 0;
  std::shared_ptr<const Select> select;  // set when kind == Select
};

/// Parses SQL text. Only the first statement is parsed in full; later ones
/// are counted. Throws SyntaxError on malformed SELECT text.
ParsedSql parse_sql(std::string_view sql);

/// Parses exactly one SELECT statement (an optional trailing ';' is allowed).
Select parse_select(std::string_view sql);

/// Parses a standalone expression.
Expr parse_expression(std::string_view text);

/// True when the outermost query selects an aggregate (COUNT, SUM, AVG, MIN,
/// MAX) or has GROUP BY. Subqueries are not inspected.
bool has_aggregate(const Select& select);
bool is_aggregate_expr(const Expr& expr);

/// Column references in an expression, not descending into subqueries.
std::vector<const Expr*> column_refs(const Expr& expr);

/// Calls `fn` on every expression node in the tree, subqueries excluded.
template <typename Fn>
void visit(const Expr& expr, Fn&& fn) {
  fn(expr);
  for (const auto& a : expr.args) visit(a, fn);
  for (const auto& a : expr.extra) visit(a, fn);
}

}  // namespace nlsql::sql
