#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace nlsql {

struct Question {
  std::string text;
  std::string db_id;
  std::optional<std::string> evidence_hint;

  friend bool operator==(const Question&, const Question&) = default;
};

/// Locates benchmark-style database directories:
/// `<root>/<db_id>/<db_id>.sqlite` plus the optional side files.
class DatabaseRegistry {
 public:
  DatabaseRegistry() = default;
  explicit DatabaseRegistry(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  bool contains(const std::string& db_id) const;
  /// Throws ConfigError when the database file does not exist.
  std::filesystem::path database_file(const std::string& db_id) const;

  std::filesystem::path docs_file(const std::string& db_id) const { return side_file(db_id, ".docs.jsonl"); }
  std::filesystem::path evidence_file(const std::string& db_id) const {
    return side_file(db_id, ".evidence.jsonl");
  }
  std::filesystem::path embedding_cache(const std::string& db_id) const {
    return side_file(db_id, ".emb.bin");
  }

 private:
  std::filesystem::path side_file(const std::string& db_id, const char* suffix) const {
    return root_ / db_id / (db_id + suffix);
  }

  std::filesystem::path root_;
};

}  // namespace nlsql
