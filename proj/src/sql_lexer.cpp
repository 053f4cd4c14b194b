#include <algorithm>
#include <cctype>

#include "nlsql/sql.hpp"

namespace nlsql::sql {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool Token::is_keyword(std::string_view kw) const {
  return kind == TokenKind::Word && quote == 0 && iequals(value, kw);
}

std::string quote_literal(std::string_view value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

namespace {

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

std::string near_text(std::string_view sql, std::size_t pos) {
  std::size_t end = pos;
  while (end < sql.size() && end - pos < 20 && !std::isspace(static_cast<unsigned char>(sql[end]))) ++end;
  return std::string(sql.substr(pos, std::max<std::size_t>(end - pos, 1)));
}

}  // namespace

std::vector<Token> tokenize(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  auto push = [&](TokenKind kind, std::string value, std::size_t start, char quote = 0) {
    out.push_back({kind, std::move(value), start, i - start, quote});
  };

  while (i < n) {
    const unsigned char c = sql[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      auto close = sql.find("*/", i + 2);
      i = close == std::string_view::npos ? n : close + 2;
      continue;
    }
    const std::size_t start = i;

    if ((c == 'x' || c == 'X') && i + 1 < n && sql[i + 1] == '\'') {
      auto close = sql.find('\'', i + 2);
      if (close == std::string_view::npos) throw SyntaxError("unterminated blob literal", start);
      i = close + 1;
      push(TokenKind::Blob, std::string(sql.substr(start + 2, close - start - 2)), start);
      continue;
    }
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(sql[i])) ++i;
      push(TokenKind::Word, std::string(sql.substr(start, i - start)), start);
      continue;
    }
    if (c == '\'' || c == '"' || c == '`') {
      const char q = static_cast<char>(c);
      std::string value;
      ++i;
      for (;;) {
        if (i >= n) {
          throw SyntaxError(q == '\'' ? "unterminated string literal" : "unterminated quoted identifier",
                            start);
        }
        if (sql[i] == q) {
          if (i + 1 < n && sql[i + 1] == q) {
            value += q;
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        value += sql[i++];
      }
      push(q == '\'' ? TokenKind::String : TokenKind::Word, std::move(value), start, q);
      continue;
    }
    if (c == '[') {
      auto close = sql.find(']', i + 1);
      if (close == std::string_view::npos) throw SyntaxError("unterminated quoted identifier", start);
      i = close + 1;
      push(TokenKind::Word, std::string(sql.substr(start + 1, close - start - 1)), start, '[');
      continue;
    }
    if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      if (c == '0' && i + 1 < n && (sql[i + 1] == 'x' || sql[i + 1] == 'X')) {
        i += 2;
        while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
      } else {
        while (i < n && (std::isdigit(static_cast<unsigned char>(sql[i])) || sql[i] == '_')) ++i;
        if (i < n && sql[i] == '.') {
          ++i;
          while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
        }
        if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
          std::size_t j = i + 1;
          if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
          if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
            i = j;
            while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
          }
        }
      }
      if (i < n && is_ident_start(sql[i])) {
        throw SyntaxError("unrecognized token: \"" + near_text(sql, start) + "\"", start);
      }
      push(TokenKind::Number, std::string(sql.substr(start, i - start)), start);
      continue;
    }
    if (c == '?' || c == ':' || c == '@' || c == '$') {
      ++i;
      while (i < n && is_ident_char(sql[i])) ++i;
      push(TokenKind::Parameter, std::string(sql.substr(start, i - start)), start);
      continue;
    }
    switch (c) {
      case '(': ++i; push(TokenKind::LParen, "(", start); continue;
      case ')': ++i; push(TokenKind::RParen, ")", start); continue;
      case ',': ++i; push(TokenKind::Comma, ",", start); continue;
      case '.': ++i; push(TokenKind::Dot, ".", start); continue;
      case ';': ++i; push(TokenKind::Semicolon, ";", start); continue;
      default: break;
    }
    static constexpr std::string_view kOps[] = {"->>", "||", "->", "<<", ">>", "<=", ">=", "==", "!=",
                                                "<>",  "*",  "/",  "%",  "+",  "-",  "&",  "|",  "<",
                                                ">",   "=",  "~"};
    bool matched = false;
    for (auto op : kOps) {
      if (sql.substr(i, op.size()) == op) {
        i += op.size();
        push(TokenKind::Operator, std::string(op), start);
        matched = true;
        break;
      }
    }
    if (!matched) throw SyntaxError("unrecognized token: \"" + near_text(sql, start) + "\"", start);
  }
  out.push_back({TokenKind::End, "", n, 0, 0});
  return out;
}

}  // namespace nlsql::sql
