#include <map>
#include <optional>

#include "nlsql/sql.hpp"
#include "nlsql/validator.hpp"

namespace nlsql {

namespace {

using sql::Token;
using sql::TokenKind;

bool is_comparison(const Token& t) {
  return t.is_op("=") || t.is_op("==") || t.is_op("!=") || t.is_op("<>");
}

bool ends_from_clause(const Token& t) {
  static constexpr const char* kEnders[] = {"WHERE", "GROUP",     "HAVING", "ORDER", "LIMIT", "UNION",
                                            "INTERSECT", "EXCEPT", "WINDOW", "ON",    "USING", "SELECT"};
  for (const char* kw : kEnders)
    if (t.is_keyword(kw)) return true;
  return false;
}

// alias (lower-cased) -> table name, from every FROM/JOIN item of every scope.
std::map<std::string, std::string> collect_aliases(const std::vector<Token>& toks) {
  std::map<std::string, std::string> aliases;
  std::vector<bool> in_from{false};
  auto table_ref_at = [&](std::size_t i) {
    if (i >= toks.size() || !toks[i].is_word() || sql::is_reserved(toks[i])) return;
    std::string name = toks[i].value;
    std::size_t j = i + 1;
    if (toks[j].kind == TokenKind::Dot && toks[j + 1].is_word()) {
      name = toks[j + 1].value;
      j += 2;
    }
    std::string alias = name;
    if (toks[j].is_keyword("AS") && toks[j + 1].is_word()) {
      alias = toks[j + 1].value;
    } else if (toks[j].is_word() && !sql::is_reserved(toks[j]) && !toks[j].is_keyword("INDEXED")) {
      alias = toks[j].value;
    }
    aliases[sql::to_lower(alias)] = name;
    aliases.emplace(sql::to_lower(name), name);
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind == TokenKind::LParen) {
      in_from.push_back(false);
      table_ref_at(i + 1);  // FROM (tbl ...) groups
    } else if (t.kind == TokenKind::RParen) {
      if (in_from.size() > 1) in_from.pop_back();
    } else if (t.is_keyword("FROM") || t.is_keyword("JOIN")) {
      in_from.back() = true;
      table_ref_at(i + 1);
    } else if (t.kind == TokenKind::Comma && in_from.back()) {
      table_ref_at(i + 1);
    } else if (ends_from_clause(t)) {
      in_from.back() = false;
    }
  }
  return aliases;
}

struct ColumnRef {
  std::string qualifier;
  std::string column;
};

// Column reference ending at toks[end] (inclusive): `col` or `q.col`.
std::optional<ColumnRef> column_ending_at(const std::vector<Token>& toks, std::size_t end) {
  if (end >= toks.size() || !toks[end].is_word() || sql::is_reserved(toks[end])) return std::nullopt;
  ColumnRef ref{"", toks[end].value};
  if (end >= 2 && toks[end - 1].kind == TokenKind::Dot && toks[end - 2].is_word()) ref.qualifier = toks[end - 2].value;
  return ref;
}

// Column reference starting at toks[begin].
std::optional<ColumnRef> column_starting_at(const std::vector<Token>& toks, std::size_t begin) {
  if (begin >= toks.size() || !toks[begin].is_word() || sql::is_reserved(toks[begin])) return std::nullopt;
  if (toks[begin + 1].kind == TokenKind::Dot) {
    if (!toks[begin + 2].is_word()) return std::nullopt;
    if (toks[begin + 3].kind == TokenKind::LParen) return std::nullopt;
    return ColumnRef{toks[begin].value, toks[begin + 2].value};
  }
  if (toks[begin + 1].kind == TokenKind::LParen) return std::nullopt;  // function call
  return ColumnRef{"", toks[begin].value};
}

// Column compared with the string literal at toks[j], if any.
std::optional<ColumnRef> compared_column(const std::vector<Token>& toks, std::size_t j) {
  if (j >= 2 && is_comparison(toks[j - 1])) {
    if (auto ref = column_ending_at(toks, j - 2)) return ref;
  }
  if (is_comparison(toks[j + 1])) {
    if (auto ref = column_starting_at(toks, j + 2)) return ref;
  }
  // [NOT] IN ( 'a', 'b', ... )
  std::size_t k = j;
  while (k > 0) {
    const Token& prev = toks[k - 1];
    if (prev.kind == TokenKind::LParen) break;
    if (prev.kind != TokenKind::Comma && prev.kind != TokenKind::String) return std::nullopt;
    --k;
  }
  if (k < 3 || !toks[k - 2].is_keyword("IN")) return std::nullopt;
  if (!toks[k - 3].is_keyword("NOT")) return column_ending_at(toks, k - 3);
  if (k < 4) return std::nullopt;
  return column_ending_at(toks, k - 4);
}

}  // namespace

AutocorrectResult autocorrect_values(const std::string& sql_text, const EvidenceMap& evidence) {
  AutocorrectResult result{sql_text, {}};
  if (evidence.entries.empty()) return result;
  std::vector<Token> toks;
  try {
    toks = sql::tokenize(sql_text);
  } catch (const sql::SyntaxError&) {
    return result;
  }
  const auto aliases = collect_aliases(toks);

  struct Edit {
    std::size_t offset;
    std::size_t length;
    std::string replacement;
  };
  std::vector<Edit> edits;

  for (std::size_t j = 0; j < toks.size(); ++j) {
    if (toks[j].kind != TokenKind::String) continue;
    const auto ref = compared_column(toks, j);
    if (!ref) continue;
    std::string table;
    if (!ref->qualifier.empty()) {
      const auto it = aliases.find(sql::to_lower(ref->qualifier));
      table = it != aliases.end() ? it->second : ref->qualifier;
    }
    std::vector<const EvidenceEntry*> candidates;
    for (const auto& e : evidence.entries) {
      if (!sql::iequals(e.column, ref->column)) continue;
      if (!table.empty() && !sql::iequals(e.table, table)) continue;
      candidates.push_back(&e);
    }
    const std::string& literal = toks[j].value;
    bool exact = false;
    for (const auto* e : candidates) exact = exact || e->db_value == literal;
    if (exact || candidates.empty()) continue;

    const EvidenceEntry* match = nullptr;
    for (const auto* e : candidates) {
      if (sql::iequals(e->db_value, literal)) {
        match = e;
        break;
      }
    }
    if (!match) {
      for (const auto* e : candidates) {
        if (sql::iequals(e->nl_term, literal)) {
          match = e;
          break;
        }
      }
    }
    if (!match) continue;
    edits.push_back({toks[j].offset, toks[j].length, sql::quote_literal(match->db_value)});
    result.corrections.push_back({literal, match->db_value, match->table, match->column});
  }

  for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
    result.sql.replace(it->offset, it->length, it->replacement);
  }
  return result;
}

}  // namespace nlsql
