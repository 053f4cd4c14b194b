#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <memory>
#include <string>

namespace nlsql::detail {

struct ConnectionCloser {
  void operator()(sqlite3* db) const { sqlite3_close_v2(db); }
};
struct StatementFinalizer {
  void operator()(sqlite3_stmt* stmt) const { sqlite3_finalize(stmt); }
};

using ConnectionPtr = std::unique_ptr<sqlite3, ConnectionCloser>;
using StatementPtr = std::unique_ptr<sqlite3_stmt, StatementFinalizer>;

/// Opens an SQLite file read-only. Returns null and fills `error` on failure.
inline ConnectionPtr open_read_only(const std::filesystem::path& file, std::string& error) {
  if (!std::filesystem::exists(file)) {
    error = "database file not found: " + file.string();
    return nullptr;
  }
  sqlite3* raw = nullptr;
  const int rc = sqlite3_open_v2(file.c_str(), &raw, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  ConnectionPtr db(raw);
  if (rc != SQLITE_OK) {
    error = raw ? sqlite3_errmsg(raw) : sqlite3_errstr(rc);
    return nullptr;
  }
  return db;
}

inline StatementPtr prepare(sqlite3* db, const std::string& sql, std::string& error,
                            const char** tail = nullptr) {
  sqlite3_stmt* raw = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), static_cast<int>(sql.size()), &raw, tail) != SQLITE_OK) {
    error = sqlite3_errmsg(db);
    return nullptr;
  }
  return StatementPtr(raw);
}

inline std::string column_text(sqlite3_stmt* stmt, int col) {
  const auto* p = sqlite3_column_text(stmt, col);
  return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(stmt, col)) : std::string();
}

}  // namespace nlsql::detail
