#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlsql/gateway.hpp"
#include "nlsql/pipeline.hpp"
#include "nlsql/question.hpp"

// Shared fixtures: small SQLite databases laid out as a registry, plus
// scripted backends. Everything lives under a temporary directory.
namespace nlsql::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Runs a script on a read-write connection, creating the file if needed.
void exec_script(const std::filesystem::path& db_file, const std::string& sql);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// schools(cdscode, sname, county, charter, district) and
/// satscores(cds -> schools.cdscode, numtsttakr, avgscrmath, numge1500), six
/// schools, with docs and evidence ("charter schools" -> 'Y', "Fresno County"
/// -> 'Fresno'). Returns the database file.
std::filesystem::path make_schools_db(const std::filesystem::path& root);

/// district(district_id, a2, a3) and account(account_id, district_id,
/// frequency); region a3 is stored as 'east Bohemia' and friends.
std::filesystem::path make_financial_db(const std::filesystem::path& root);

/// Plan text with one entity per output column that names a column, and a
/// single step.
std::string simple_plan(const std::vector<std::string>& output_columns,
                        const std::vector<std::string>& entity_bindings = {});

std::string fenced_sql(const std::string& sql);

/// Scripted backends for all four roles; the fallback is priced like a
/// remote model, everything else is free.
PipelineBackends scripted_backends(std::map<std::string, std::vector<std::string>> decomposer,
                                   std::map<std::string, std::vector<std::string>> primary,
                                   std::map<std::string, std::vector<std::string>> fallback,
                                   Pricing fallback_pricing = {2.5, 10.0});

}  // namespace nlsql::testing
