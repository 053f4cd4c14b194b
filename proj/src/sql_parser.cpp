#include <algorithm>
#include <array>
#include <cctype>

#include "nlsql/sql.hpp"

namespace nlsql::sql {

namespace {

constexpr std::array kReserved = {
    "ALL",      "AND",     "AS",        "ASC",       "BETWEEN",  "BY",          "CASE",
    "CAST",     "COLLATE", "CROSS",     "DESC",      "DISTINCT", "ELSE",        "END",
    "ESCAPE",   "EXCEPT",  "EXISTS",    "FROM",      "FULL",     "GLOB",        "GROUP",
    "HAVING",   "IN",      "INDEXED",   "INNER",     "INTERSECT", "IS",         "ISNULL",
    "JOIN",     "LEFT",    "LIKE",      "LIMIT",     "NATURAL",  "NOT",         "NOTNULL",
    "NULL",     "OFFSET",  "ON",        "OR",        "ORDER",    "OUTER",       "REGEXP",
    "RIGHT",    "SELECT",  "THEN",      "UNION",     "USING",    "VALUES",      "WHEN",
    "WHERE",    "WINDOW",  "WITH",      "MATCH",
};

}  // namespace

bool is_reserved(const Token& t) {
  if (!t.is_bare_word()) return false;
  return std::any_of(kReserved.begin(), kReserved.end(),
                     [&](const char* kw) { return iequals(t.value, kw); });
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view sql) : src_(sql), toks_(tokenize(sql)) {}

  Select select_statement() {
    Select s = select();
    while (peek().kind == TokenKind::Semicolon) ++pos_;
    if (peek().kind != TokenKind::End) fail_near(peek());
    return s;
  }

  Expr standalone_expression() {
    Expr e = expr();
    if (peek().kind != TokenKind::End) fail_near(peek());
    return e;
  }

  ParsedSql script() {
    ParsedSql out;
    // Count non-empty statements separated by top-level semicolons.
    std::size_t depth = 0;
    bool in_statement = false;
    for (const auto& t : toks_) {
      if (t.kind == TokenKind::End) break;
      if (t.kind == TokenKind::LParen) ++depth;
      if (t.kind == TokenKind::RParen && depth > 0) --depth;
      if (t.kind == TokenKind::Semicolon && depth == 0) {
        in_statement = false;
        continue;
      }
      if (!in_statement) {
        in_statement = true;
        ++out.statement_count;
      }
    }
    while (peek().kind == TokenKind::Semicolon) ++pos_;
    const Token& first = peek();
    if (first.kind == TokenKind::End) return out;
    out.leading_keyword = first.is_word() ? upper(first.value) : first.value;
    if (first.is_keyword("SELECT") || first.is_keyword("WITH") || first.is_keyword("VALUES")) {
      out.kind = StatementKind::Select;
      auto sel = std::make_shared<Select>(select());
      if (peek().kind != TokenKind::Semicolon && peek().kind != TokenKind::End) fail_near(peek());
      out.select = std::move(sel);
    } else if (first.kind == TokenKind::LParen) {
      fail_near(first);
    } else {
      out.kind = StatementKind::Other;
    }
    return out;
  }

 private:
  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept_kw(std::string_view kw) {
    if (peek().is_keyword(kw)) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept(TokenKind kind) {
    if (peek().kind == kind) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_op(std::string_view op) {
    if (peek().is_op(op)) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail_near(const Token& t) const {
    if (t.kind == TokenKind::End) throw SyntaxError("incomplete input", t.offset);
    throw SyntaxError("near \"" + std::string(src_.substr(t.offset, t.length)) + "\": syntax error",
                      t.offset);
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail_near(peek());
  }
  void expect(TokenKind kind) {
    if (!accept(kind)) fail_near(peek());
  }

  std::string identifier() {
    const Token& t = peek();
    if (!t.is_word() || is_reserved(t)) fail_near(t);
    ++pos_;
    return t.value;
  }

  // Optional alias: [AS] name, where a bare name must not be a keyword.
  std::string alias(bool allow_string) {
    if (accept_kw("AS")) {
      const Token& t = peek();
      if (t.is_word() || (allow_string && t.kind == TokenKind::String)) {
        ++pos_;
        return t.value;
      }
      fail_near(t);
    }
    const Token& t = peek();
    if ((t.is_word() && !is_reserved(t)) || (allow_string && t.kind == TokenKind::String)) {
      ++pos_;
      return t.value;
    }
    return {};
  }

  bool starts_select() const {
    return peek().is_keyword("SELECT") || peek().is_keyword("WITH") || peek().is_keyword("VALUES");
  }

  // ---- SELECT ----------------------------------------------------------

  Select select() {
    Select s;
    if (accept_kw("WITH")) {
      s.recursive = accept_kw("RECURSIVE");
      do {
        Cte cte;
        cte.name = identifier();
        if (accept(TokenKind::LParen)) {
          do cte.columns.push_back(identifier());
          while (accept(TokenKind::Comma));
          expect(TokenKind::RParen);
        }
        expect_kw("AS");
        accept_kw("NOT");
        accept_kw("MATERIALIZED");
        expect(TokenKind::LParen);
        cte.select = std::make_shared<Select>(select());
        expect(TokenKind::RParen);
        s.ctes.push_back(std::move(cte));
      } while (accept(TokenKind::Comma));
    }
    s.cores.push_back(select_core());
    for (;;) {
      std::string op;
      if (accept_kw("UNION")) {
        op = accept_kw("ALL") ? "UNION ALL" : "UNION";
      } else if (accept_kw("INTERSECT")) {
        op = "INTERSECT";
      } else if (accept_kw("EXCEPT")) {
        op = "EXCEPT";
      } else {
        break;
      }
      s.compounds.push_back(op);
      s.cores.push_back(select_core());
    }
    if (accept_kw("ORDER")) {
      expect_kw("BY");
      do s.order_by.push_back(ordering_term());
      while (accept(TokenKind::Comma));
    }
    if (accept_kw("LIMIT")) {
      s.limit = expr();
      if (accept_kw("OFFSET")) {
        s.offset = expr();
      } else if (accept(TokenKind::Comma)) {
        // LIMIT offset, count
        s.offset = std::move(s.limit);
        s.limit = expr();
      }
    }
    return s;
  }

  OrderingTerm ordering_term() {
    OrderingTerm term;
    term.expr = expr();
    if (accept_kw("DESC")) {
      term.descending = true;
    } else {
      accept_kw("ASC");
    }
    if (accept_kw("NULLS")) {
      if (!accept_kw("FIRST")) expect_kw("LAST");
    }
    return term;
  }

  SelectCore select_core() {
    SelectCore core;
    if (accept_kw("VALUES")) {
      core.is_values = true;
      do {
        expect(TokenKind::LParen);
        std::vector<Expr> row;
        do row.push_back(expr());
        while (accept(TokenKind::Comma));
        expect(TokenKind::RParen);
        core.values.push_back(std::move(row));
      } while (accept(TokenKind::Comma));
      return core;
    }
    expect_kw("SELECT");
    if (accept_kw("DISTINCT")) {
      core.distinct = true;
    } else {
      accept_kw("ALL");
    }
    do core.columns.push_back(result_column());
    while (accept(TokenKind::Comma));
    if (accept_kw("FROM")) core.from = join_clause();
    if (accept_kw("WHERE")) core.where = expr();
    if (accept_kw("GROUP")) {
      expect_kw("BY");
      do core.group_by.push_back(expr());
      while (accept(TokenKind::Comma));
      if (accept_kw("HAVING")) core.having = expr();
    } else if (accept_kw("HAVING")) {
      core.having = expr();
    }
    if (accept_kw("WINDOW")) {
      do {
        identifier();
        expect_kw("AS");
        window_definition(core.window_exprs);
      } while (accept(TokenKind::Comma));
    }
    return core;
  }

  ResultColumn result_column() {
    ResultColumn col;
    if (accept_op("*")) {
      col.kind = ResultColumn::Kind::Star;
      return col;
    }
    if (peek().is_word() && peek(1).kind == TokenKind::Dot && peek(2).is_op("*")) {
      col.kind = ResultColumn::Kind::TableStar;
      col.table = next().value;
      pos_ += 2;
      return col;
    }
    col.expr = expr();
    col.alias = alias(true);
    return col;
  }

  std::vector<TableRef> join_clause() {
    std::vector<TableRef> items;
    items.push_back(table_or_subquery());
    for (;;) {
      TableRef::JoinOp op;
      std::string join_type;
      bool natural = false;
      if (accept(TokenKind::Comma)) {
        op = TableRef::JoinOp::Comma;
      } else {
        natural = accept_kw("NATURAL");
        if (accept_kw("LEFT")) {
          join_type = "LEFT";
          accept_kw("OUTER");
        } else if (accept_kw("RIGHT")) {
          join_type = "RIGHT";
          accept_kw("OUTER");
        } else if (accept_kw("FULL")) {
          join_type = "FULL";
          accept_kw("OUTER");
        } else if (accept_kw("INNER")) {
          join_type = "INNER";
        } else if (accept_kw("CROSS")) {
          join_type = "CROSS";
        }
        if (!accept_kw("JOIN")) {
          if (natural || !join_type.empty()) fail_near(peek());
          break;
        }
        op = TableRef::JoinOp::Join;
      }
      TableRef item = table_or_subquery();
      item.op = op;
      item.join_type = join_type;
      item.natural = natural;
      if (accept_kw("ON")) {
        item.on = expr();
      } else if (accept_kw("USING")) {
        item.has_using = true;
        expect(TokenKind::LParen);
        do item.using_columns.push_back(identifier());
        while (accept(TokenKind::Comma));
        expect(TokenKind::RParen);
      }
      items.push_back(std::move(item));
    }
    return items;
  }

  TableRef table_or_subquery() {
    TableRef ref;
    ref.offset = peek().offset;
    if (accept(TokenKind::LParen)) {
      if (starts_select()) {
        ref.kind = TableRef::Kind::Subquery;
        ref.subquery = std::make_shared<Select>(select());
      } else {
        ref.kind = TableRef::Kind::Group;
        ref.group = join_clause();
      }
      expect(TokenKind::RParen);
      ref.alias = alias(false);
      return ref;
    }
    ref.name = identifier();
    if (accept(TokenKind::Dot)) {
      ref.schema = std::move(ref.name);
      ref.name = identifier();
    }
    if (accept(TokenKind::LParen)) {
      ref.kind = TableRef::Kind::Function;
      if (peek().kind != TokenKind::RParen) {
        do ref.function_args.push_back(expr());
        while (accept(TokenKind::Comma));
      }
      expect(TokenKind::RParen);
    }
    ref.alias = alias(false);
    if (accept_kw("INDEXED")) {
      expect_kw("BY");
      identifier();
    } else if (peek().is_keyword("NOT") && peek(1).is_keyword("INDEXED")) {
      pos_ += 2;
    }
    return ref;
  }

  // ---- expressions -----------------------------------------------------

  Expr make(Expr::Kind kind, std::string text, std::size_t offset) {
    Expr e;
    e.kind = kind;
    e.text = std::move(text);
    e.offset = offset;
    return e;
  }

  Expr binary(std::string op, Expr lhs, Expr rhs) {
    Expr e = make(Expr::Kind::Binary, std::move(op), lhs.offset);
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  Expr expr() { return or_expr(); }

  Expr or_expr() {
    Expr lhs = and_expr();
    while (accept_kw("OR")) lhs = binary("OR", std::move(lhs), and_expr());
    return lhs;
  }

  Expr and_expr() {
    Expr lhs = not_expr();
    while (accept_kw("AND")) lhs = binary("AND", std::move(lhs), not_expr());
    return lhs;
  }

  Expr not_expr() {
    if (peek().is_keyword("NOT") && !peek(1).is_keyword("EXISTS")) {
      const std::size_t off = next().offset;
      Expr e = make(Expr::Kind::Unary, "NOT", off);
      e.args.push_back(not_expr());
      return e;
    }
    return equality();
  }

  Expr equality() {
    Expr lhs = comparison();
    for (;;) {
      const Token& t = peek();
      if (t.is_op("=") || t.is_op("==") || t.is_op("!=") || t.is_op("<>")) {
        std::string op = next().value;
        lhs = binary(op, std::move(lhs), comparison());
        continue;
      }
      if (t.is_keyword("IS")) {
        ++pos_;
        bool negated = accept_kw("NOT");
        if (accept_kw("DISTINCT")) {
          expect_kw("FROM");
          lhs = binary(negated ? "IS NOT DISTINCT FROM" : "IS DISTINCT FROM", std::move(lhs), comparison());
        } else if (peek().is_keyword("NULL")) {
          ++pos_;
          Expr e = make(Expr::Kind::IsNull, "", lhs.offset);
          e.negated = negated;
          e.args.push_back(std::move(lhs));
          lhs = std::move(e);
        } else {
          lhs = binary(negated ? "IS NOT" : "IS", std::move(lhs), comparison());
        }
        continue;
      }
      if (t.is_keyword("ISNULL") || t.is_keyword("NOTNULL")) {
        Expr e = make(Expr::Kind::IsNull, "", lhs.offset);
        e.negated = next().is_keyword("NOTNULL");
        e.args.push_back(std::move(lhs));
        lhs = std::move(e);
        continue;
      }
      bool negated = false;
      std::size_t save = pos_;
      if (t.is_keyword("NOT")) {
        if (peek(1).is_keyword("NULL")) {
          pos_ += 2;
          Expr e = make(Expr::Kind::IsNull, "", lhs.offset);
          e.negated = true;
          e.args.push_back(std::move(lhs));
          lhs = std::move(e);
          continue;
        }
        negated = true;
        ++pos_;
      }
      if (accept_kw("IN")) {
        lhs = in_tail(std::move(lhs), negated);
        continue;
      }
      if (peek().is_keyword("LIKE") || peek().is_keyword("GLOB") || peek().is_keyword("REGEXP") ||
          peek().is_keyword("MATCH")) {
        Expr e = make(Expr::Kind::Like, upper(next().value), lhs.offset);
        e.negated = negated;
        e.args.push_back(std::move(lhs));
        e.args.push_back(comparison());
        if (accept_kw("ESCAPE")) e.args.push_back(comparison());
        lhs = std::move(e);
        continue;
      }
      if (accept_kw("BETWEEN")) {
        Expr e = make(Expr::Kind::Between, "BETWEEN", lhs.offset);
        e.negated = negated;
        e.args.push_back(std::move(lhs));
        e.args.push_back(comparison());
        expect_kw("AND");
        e.args.push_back(comparison());
        lhs = std::move(e);
        continue;
      }
      pos_ = save;
      return lhs;
    }
  }

  Expr in_tail(Expr lhs, bool negated) {
    Expr e = make(Expr::Kind::In, "IN", lhs.offset);
    e.negated = negated;
    e.args.push_back(std::move(lhs));
    if (accept(TokenKind::LParen)) {
      if (starts_select()) {
        e.subquery = std::make_shared<Select>(select());
      } else if (peek().kind != TokenKind::RParen) {
        do e.args.push_back(expr());
        while (accept(TokenKind::Comma));
      }
      expect(TokenKind::RParen);
    } else {
      // IN table-name: rewrite as a subquery over that table.
      Select sub;
      SelectCore core;
      ResultColumn star;
      star.kind = ResultColumn::Kind::Star;
      core.columns.push_back(std::move(star));
      TableRef ref;
      ref.offset = peek().offset;
      ref.name = identifier();
      core.from.push_back(std::move(ref));
      sub.cores.push_back(std::move(core));
      e.subquery = std::make_shared<Select>(std::move(sub));
    }
    return e;
  }

  Expr comparison() {
    Expr lhs = bitwise();
    while (peek().is_op("<") || peek().is_op("<=") || peek().is_op(">") || peek().is_op(">=")) {
      std::string op = next().value;
      lhs = binary(op, std::move(lhs), bitwise());
    }
    return lhs;
  }

  Expr bitwise() {
    Expr lhs = additive();
    while (peek().is_op("&") || peek().is_op("|") || peek().is_op("<<") || peek().is_op(">>")) {
      std::string op = next().value;
      lhs = binary(op, std::move(lhs), additive());
    }
    return lhs;
  }

  Expr additive() {
    Expr lhs = multiplicative();
    while (peek().is_op("+") || peek().is_op("-")) {
      std::string op = next().value;
      lhs = binary(op, std::move(lhs), multiplicative());
    }
    return lhs;
  }

  Expr multiplicative() {
    Expr lhs = concat();
    while (peek().is_op("*") || peek().is_op("/") || peek().is_op("%")) {
      std::string op = next().value;
      lhs = binary(op, std::move(lhs), concat());
    }
    return lhs;
  }

  Expr concat() {
    Expr lhs = unary();
    while (peek().is_op("||") || peek().is_op("->") || peek().is_op("->>")) {
      std::string op = next().value;
      lhs = binary(op, std::move(lhs), unary());
    }
    return lhs;
  }

  Expr unary() {
    if (peek().is_op("-") || peek().is_op("+") || peek().is_op("~")) {
      const Token& t = next();
      Expr e = make(Expr::Kind::Unary, t.value, t.offset);
      e.args.push_back(unary());
      return e;
    }
    Expr e = primary();
    while (accept_kw("COLLATE")) {
      Expr c = make(Expr::Kind::Collate, identifier(), e.offset);
      c.args.push_back(std::move(e));
      e = std::move(c);
    }
    return e;
  }

  std::string type_name() {
    std::string name;
    while (peek().is_word() && !is_reserved(peek())) {
      if (!name.empty()) name += ' ';
      name += next().value;
    }
    if (name.empty()) fail_near(peek());
    if (accept(TokenKind::LParen)) {
      name += '(';
      name += next().value;
      if (accept(TokenKind::Comma)) name += "," + next().value;
      expect(TokenKind::RParen);
      name += ')';
    }
    return name;
  }

  void window_definition(std::vector<Expr>& sink) {
    expect(TokenKind::LParen);
    if (peek().is_word() && !is_reserved(peek()) && !peek().is_keyword("PARTITION") &&
        !peek().is_keyword("ROWS") && !peek().is_keyword("RANGE") && !peek().is_keyword("GROUPS")) {
      ++pos_;  // base window name
    }
    if (accept_kw("PARTITION")) {
      expect_kw("BY");
      do sink.push_back(expr());
      while (accept(TokenKind::Comma));
    }
    if (accept_kw("ORDER")) {
      expect_kw("BY");
      do sink.push_back(ordering_term().expr);
      while (accept(TokenKind::Comma));
    }
    // Frame specification: skip to the closing parenthesis.
    std::size_t depth = 0;
    while (!(depth == 0 && peek().kind == TokenKind::RParen)) {
      if (peek().kind == TokenKind::End) fail_near(peek());
      if (peek().kind == TokenKind::LParen) ++depth;
      if (peek().kind == TokenKind::RParen) --depth;
      ++pos_;
    }
    expect(TokenKind::RParen);
  }

  Expr function_call(const Token& name_tok) {
    Expr e = make(Expr::Kind::Function, upper(name_tok.value), name_tok.offset);
    expect(TokenKind::LParen);
    if (accept_op("*")) {
      e.star_arg = true;
    } else if (peek().kind != TokenKind::RParen) {
      if (accept_kw("DISTINCT")) {
        e.distinct = true;
      } else {
        accept_kw("ALL");
      }
      do e.args.push_back(expr());
      while (accept(TokenKind::Comma));
      if (accept_kw("ORDER")) {
        expect_kw("BY");
        do e.extra.push_back(ordering_term().expr);
        while (accept(TokenKind::Comma));
      }
    }
    expect(TokenKind::RParen);
    if (peek().is_keyword("FILTER") && peek(1).kind == TokenKind::LParen) {
      ++pos_;
      expect(TokenKind::LParen);
      expect_kw("WHERE");
      e.extra.push_back(expr());
      expect(TokenKind::RParen);
    }
    if (peek().is_keyword("OVER")) {
      ++pos_;
      if (peek().kind == TokenKind::LParen) {
        window_definition(e.extra);
      } else {
        identifier();
      }
    }
    return e;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number:
      case TokenKind::String:
      case TokenKind::Blob: {
        ++pos_;
        return make(Expr::Kind::Literal, std::string(src_.substr(t.offset, t.length)), t.offset);
      }
      case TokenKind::Parameter:
        ++pos_;
        return make(Expr::Kind::Parameter, t.value, t.offset);
      case TokenKind::LParen: {
        ++pos_;
        if (starts_select()) {
          Expr e = make(Expr::Kind::Subquery, "", t.offset);
          e.subquery = std::make_shared<Select>(select());
          expect(TokenKind::RParen);
          return e;
        }
        Expr first = expr();
        if (accept(TokenKind::RParen)) return first;
        Expr row = make(Expr::Kind::Row, "", t.offset);
        row.args.push_back(std::move(first));
        while (accept(TokenKind::Comma)) row.args.push_back(expr());
        expect(TokenKind::RParen);
        return row;
      }
      case TokenKind::Word:
        break;
      default:
        fail_near(t);
    }

    if (t.quote == 0) {
      if (t.is_keyword("NULL") || t.is_keyword("CURRENT_DATE") || t.is_keyword("CURRENT_TIME") ||
          t.is_keyword("CURRENT_TIMESTAMP") ||
          ((t.is_keyword("TRUE") || t.is_keyword("FALSE")) && peek(1).kind != TokenKind::Dot &&
           peek(1).kind != TokenKind::LParen)) {
        ++pos_;
        return make(Expr::Kind::Literal, upper(t.value), t.offset);
      }
      if (t.is_keyword("CAST")) {
        ++pos_;
        expect(TokenKind::LParen);
        Expr inner = expr();
        expect_kw("AS");
        Expr e = make(Expr::Kind::Cast, type_name(), t.offset);
        e.args.push_back(std::move(inner));
        expect(TokenKind::RParen);
        return e;
      }
      if (t.is_keyword("CASE")) {
        ++pos_;
        Expr e = make(Expr::Kind::Case, "CASE", t.offset);
        if (!peek().is_keyword("WHEN")) {
          e.has_operand = true;
          e.args.push_back(expr());
        }
        if (!peek().is_keyword("WHEN")) fail_near(peek());
        while (accept_kw("WHEN")) {
          e.args.push_back(expr());
          expect_kw("THEN");
          e.args.push_back(expr());
        }
        if (accept_kw("ELSE")) {
          e.has_else = true;
          e.args.push_back(expr());
        }
        expect_kw("END");
        return e;
      }
      if (t.is_keyword("EXISTS") || (t.is_keyword("NOT") && peek(1).is_keyword("EXISTS"))) {
        Expr e = make(Expr::Kind::Exists, "EXISTS", t.offset);
        if (t.is_keyword("NOT")) {
          e.negated = true;
          ++pos_;
        }
        ++pos_;
        expect(TokenKind::LParen);
        e.subquery = std::make_shared<Select>(select());
        expect(TokenKind::RParen);
        return e;
      }
      if (peek(1).kind == TokenKind::LParen) {
        // Functions may share a name with a keyword (REPLACE, LIKE, GLOB).
        if (is_reserved(t) && !t.is_keyword("LIKE") && !t.is_keyword("GLOB")) fail_near(t);
        ++pos_;
        return function_call(t);
      }
      if (is_reserved(t)) fail_near(t);
    }

    // Column reference: [[schema.]table.]column
    ++pos_;
    Expr e = make(Expr::Kind::Column, "", t.offset);
    e.name = t.value;
    e.double_quoted = t.quote == '"';
    if (peek().kind == TokenKind::Dot && peek(1).is_word()) {
      ++pos_;
      e.table = std::move(e.name);
      const Token& col = next();
      e.name = col.value;
      e.double_quoted = col.quote == '"';
      if (peek().kind == TokenKind::Dot && peek(1).is_word()) {
        ++pos_;
        e.table = std::move(e.name);
        const Token& c2 = next();
        e.name = c2.value;
        e.double_quoted = c2.quote == '"';
      }
    }
    return e;
  }
};

}  // namespace

ParsedSql parse_sql(std::string_view sql) { return Parser(sql).script(); }

Select parse_select(std::string_view sql) { return Parser(sql).select_statement(); }

Expr parse_expression(std::string_view text) { return Parser(text).standalone_expression(); }

bool is_aggregate_expr(const Expr& expr) {
  bool found = false;
  visit(expr, [&](const Expr& e) {
    if (e.kind != Expr::Kind::Function) return;
    if (e.text == "COUNT" || e.text == "SUM" || e.text == "AVG") found = true;
    // Multi-argument MIN/MAX are scalar functions in SQLite.
    if ((e.text == "MIN" || e.text == "MAX") && e.args.size() == 1) found = true;
  });
  return found;
}

bool has_aggregate(const Select& select) {
  for (const auto& core : select.cores) {
    if (!core.group_by.empty()) return true;
    if (core.having && is_aggregate_expr(*core.having)) return true;
    for (const auto& col : core.columns) {
      if (col.kind == ResultColumn::Kind::Expression && is_aggregate_expr(col.expr)) return true;
    }
  }
  return false;
}

std::vector<const Expr*> column_refs(const Expr& expr) {
  std::vector<const Expr*> out;
  visit(expr, [&](const Expr& e) {
    if (e.kind == Expr::Kind::Column) out.push_back(&e);
  });
  return out;
}

}  // namespace nlsql::sql
