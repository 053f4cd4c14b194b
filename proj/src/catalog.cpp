#include <spdlog/spdlog.h>

#include <algorithm>
#include <sstream>

#include "nlsql/errors.hpp"
#include "nlsql/schema.hpp"
#include "nlsql/sql.hpp"
#include "sqlite_handle.hpp"

namespace nlsql {

bool DatabaseRegistry::contains(const std::string& db_id) const {
  return !db_id.empty() && std::filesystem::is_regular_file(root_ / db_id / (db_id + ".sqlite"));
}

std::filesystem::path DatabaseRegistry::database_file(const std::string& db_id) const {
  if (!contains(db_id)) {
    throw ConfigError("unknown database '" + db_id + "' (expected " +
                      (root_ / db_id / (db_id + ".sqlite")).string() + ")");
  }
  return root_ / db_id / (db_id + ".sqlite");
}

const ColumnInfo* TableInfo::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (sql::iequals(c.name, column)) return &c;
  }
  return nullptr;
}

const TableInfo* SchemaCatalog::find_table(std::string_view table) const {
  for (const auto& t : tables) {
    if (sql::iequals(t.name, table)) return &t;
  }
  return nullptr;
}

bool SchemaCatalog::has_column(std::string_view table, std::string_view column) const {
  const TableInfo* t = find_table(table);
  return t != nullptr && t->find_column(column) != nullptr;
}

std::string SchemaCatalog::summary() const {
  std::ostringstream out;
  for (const auto& t : tables) {
    out << "TABLE " << t.name << " (";
    const auto pk = primary_keys.find(t.name);
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      const auto& c = t.columns[i];
      if (i) out << ", ";
      out << c.name;
      if (!c.declared_type.empty()) out << ' ' << c.declared_type;
      if (pk != primary_keys.end() &&
          std::find(pk->second.begin(), pk->second.end(), c.name) != pk->second.end()) {
        out << " PK";
      }
      if (!c.nullable) out << " NOT NULL";
    }
    out << ")\n";
  }
  for (const auto& fk : foreign_keys) {
    out << "FK " << fk.from_table << '.' << fk.from_column << " -> " << fk.to_table << '.'
        << fk.to_column << '\n';
  }
  return out.str();
}

namespace {

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SchemaCatalog introspect_schema(const std::filesystem::path& db_file) {
  std::string error;
  auto db = detail::open_read_only(db_file, error);
  if (!db) throw ExtractionError("cannot open database: " + error);

  auto fail = [&](const std::string& what) -> ExtractionError {
    return ExtractionError("cannot introspect " + db_file.string() + ": " + what);
  };

  SchemaCatalog catalog;
  auto tables = detail::prepare(db.get(),
                                "SELECT name FROM sqlite_master WHERE type IN ('table','view') "
                                "AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid",
                                error);
  if (!tables) throw fail(error);
  int rc;
  while ((rc = sqlite3_step(tables.get())) == SQLITE_ROW) {
    catalog.tables.push_back({detail::column_text(tables.get(), 0), {}});
  }
  if (rc != SQLITE_DONE) throw fail(sqlite3_errmsg(db.get()));

  struct RawFk {
    std::string from_table, from_column, to_table, to_column;
  };
  std::vector<RawFk> raw_fks;

  for (auto& table : catalog.tables) {
    auto info = detail::prepare(db.get(), "PRAGMA table_info(" + quote_ident(table.name) + ")", error);
    if (!info) throw fail(error);
    std::vector<std::pair<int, std::string>> pk_cols;
    while ((rc = sqlite3_step(info.get())) == SQLITE_ROW) {
      ColumnInfo col;
      col.name = detail::column_text(info.get(), 1);
      col.declared_type = detail::column_text(info.get(), 2);
      col.nullable = sqlite3_column_int(info.get(), 3) == 0;
      const int pk_index = sqlite3_column_int(info.get(), 5);
      if (pk_index > 0) pk_cols.emplace_back(pk_index, col.name);
      table.columns.push_back(std::move(col));
    }
    if (rc != SQLITE_DONE) throw fail(sqlite3_errmsg(db.get()));
    if (!pk_cols.empty()) {
      std::sort(pk_cols.begin(), pk_cols.end());
      auto& key = catalog.primary_keys[table.name];
      for (auto& [_, name] : pk_cols) key.push_back(name);
    }

    auto fks = detail::prepare(db.get(), "PRAGMA foreign_key_list(" + quote_ident(table.name) + ")", error);
    if (!fks) throw fail(error);
    while ((rc = sqlite3_step(fks.get())) == SQLITE_ROW) {
      raw_fks.push_back({table.name, detail::column_text(fks.get(), 3), detail::column_text(fks.get(), 2),
                         sqlite3_column_type(fks.get(), 4) == SQLITE_NULL
                             ? std::string()
                             : detail::column_text(fks.get(), 4)});
    }
    if (rc != SQLITE_DONE) throw fail(sqlite3_errmsg(db.get()));
  }

  for (auto& fk : raw_fks) {
    const TableInfo* target = catalog.find_table(fk.to_table);
    if (target && fk.to_column.empty()) {
      // "REFERENCES t" without a column list targets t's primary key.
      auto pk = catalog.primary_keys.find(target->name);
      if (pk != catalog.primary_keys.end() && pk->second.size() == 1) fk.to_column = pk->second.front();
    }
    if (!catalog.has_column(fk.from_table, fk.from_column) || !target ||
        target->find_column(fk.to_column) == nullptr) {
      spdlog::warn("ignoring foreign key {}.{} -> {}.{}: endpoint not in schema", fk.from_table,
                   fk.from_column, fk.to_table, fk.to_column);
      continue;
    }
    catalog.foreign_keys.push_back({fk.from_table, fk.from_column, target->name,
                                    target->find_column(fk.to_column)->name});
  }
  return catalog;
}

}  // namespace nlsql
