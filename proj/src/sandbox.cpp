#include <algorithm>
#include <cstring>

#include "nlsql/sql.hpp"
#include "nlsql/validator.hpp"
#include "sqlite_handle.hpp"

namespace nlsql {

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
  Clock::time_point at;
  bool expired = false;
};

int progress_check(void* arg) {
  auto* deadline = static_cast<Deadline*>(arg);
  if (Clock::now() >= deadline->at) deadline->expired = true;
  return deadline->expired ? 1 : 0;
}

// Only reads are authorized; every write, schema change, ATTACH, PRAGMA or
// transaction statement is refused at prepare time.
int authorize(void*, int action, const char* arg1, const char* arg2, const char*, const char*) {
  switch (action) {
    case SQLITE_SELECT:
    case SQLITE_READ:
    case SQLITE_RECURSIVE:
      return SQLITE_OK;
    case SQLITE_FUNCTION:
      if (arg2 && std::strcmp(arg2, "load_extension") == 0) return SQLITE_DENY;
      return SQLITE_OK;
    default:
      (void)arg1;
      return SQLITE_DENY;
  }
}

bool only_separators_left(const char* tail) {
  if (!tail) return true;
  try {
    for (const auto& t : sql::tokenize(tail)) {
      if (t.kind != sql::TokenKind::Semicolon && t.kind != sql::TokenKind::End) return false;
    }
    return true;
  } catch (const sql::SyntaxError&) {
    return false;
  }
}

Value read_value(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_INTEGER:
      return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT:
      return sqlite3_column_double(stmt, col);
    case SQLITE_TEXT:
      return detail::column_text(stmt, col);
    case SQLITE_BLOB: {
      const auto* p = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
      return Blob(p, p + sqlite3_column_bytes(stmt, col));
    }
    default:
      return std::monostate{};
  }
}

SandboxResult failure(std::string message) {
  return {StageResult{Stage::Execution, StageStatus::Fail, {std::move(message)}}, std::nullopt};
}

}  // namespace

SandboxResult execute_sandboxed(const std::string& sql_text, const std::filesystem::path& db_file,
                                const SandboxLimits& limits) {
  std::string error;
  auto db = detail::open_read_only(db_file, error);
  if (!db) return failure("cannot open database: " + error);

  if (sqlite3_exec(db.get(), "BEGIN", nullptr, nullptr, nullptr) != SQLITE_OK) {
    return failure(std::string("cannot begin transaction: ") + sqlite3_errmsg(db.get()));
  }
  struct Rollback {
    sqlite3* db;
    ~Rollback() {
      sqlite3_set_authorizer(db, nullptr, nullptr);
      sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
    }
  } rollback{db.get()};

  sqlite3_set_authorizer(db.get(), authorize, nullptr);
  const char* tail = nullptr;
  auto stmt = detail::prepare(db.get(), sql_text, error, &tail);
  if (!stmt) {
    if (error.empty()) error = "empty statement";
    return failure(error);
  }
  if (!only_separators_left(tail)) return failure("multiple statements");
  if (!sqlite3_stmt_readonly(stmt.get())) return failure("statement is not read-only");

  Deadline deadline{Clock::now() + limits.timeout};
  sqlite3_progress_handler(db.get(), 1000, progress_check, &deadline);

  ExecutionOutcome outcome;
  const int ncols = sqlite3_column_count(stmt.get());
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(stmt.get(), i);
    outcome.column_names.emplace_back(name ? name : "");
  }

  const auto start = Clock::now();
  int rc = SQLITE_ROW;
  while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
    if (outcome.rows.size() >= limits.max_rows) {
      outcome.truncated = true;
      rc = SQLITE_DONE;
      break;
    }
    Row row;
    row.reserve(static_cast<std::size_t>(ncols));
    for (int i = 0; i < ncols; ++i) row.push_back(read_value(stmt.get(), i));
    outcome.rows.push_back(std::move(row));
  }
  outcome.runtime = std::max(std::chrono::nanoseconds(1),
                             std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start));
  sqlite3_progress_handler(db.get(), 0, nullptr, nullptr);

  if (rc != SQLITE_DONE) {
    if (deadline.expired) return failure("timeout after " + std::to_string(limits.timeout.count()) + " ms");
    return failure(sqlite3_errmsg(db.get()));
  }
  return {StageResult{Stage::Execution, StageStatus::Pass, {}}, std::move(outcome)};
}

}  // namespace nlsql
