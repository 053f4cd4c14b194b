#include "fixtures.hpp"

#include <openssl/evp.h>
#include <sqlite3.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nlsql::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  std::mt19937_64 rng(rd());
  for (int i = 0; i < 100; ++i) {
    fs::path candidate = fs::temp_directory_path() / ("nlsql-test-" + std::to_string(rng()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void exec_script(const fs::path& db_file, const std::string& sql) {
  sqlite3* db = nullptr;
  if (sqlite3_open(db_file.c_str(), &db) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw std::runtime_error("open " + db_file.string() + ": " + msg);
  }
  char* err = nullptr;
  const int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err);
  std::string msg = err ? err : "";
  sqlite3_free(err);
  sqlite3_close(db);
  if (rc != SQLITE_OK) throw std::runtime_error("script failed: " + msg);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_sha256(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

fs::path make_schools_db(const fs::path& root) {
  const fs::path dir = root / "schools";
  fs::create_directories(dir);
  const fs::path db = dir / "schools.sqlite";
  exec_script(db, R"(
    CREATE TABLE schools (
      cdscode TEXT PRIMARY KEY,
      sname TEXT NOT NULL,
      county TEXT,
      charter TEXT,
      district TEXT
    );
    CREATE TABLE satscores (
      cds TEXT PRIMARY KEY REFERENCES schools(cdscode),
      numtsttakr INTEGER,
      avgscrmath INTEGER,
      numge1500 INTEGER
    );
    INSERT INTO schools VALUES
      ('01001', 'Alameda High', 'Alameda', 'N', 'Alameda Unified'),
      ('01002', 'Oakland Charter Academy', 'Alameda', 'Y', 'Oakland Unified'),
      ('01003', 'Fresno Charter Prep', 'Fresno', 'Y', 'Fresno Unified'),
      ('01004', 'Fresno High', 'Fresno', 'N', 'Fresno Unified'),
      ('01005', 'Berkeley Charter Arts', 'Alameda', 'Y', 'Berkeley Unified'),
      ('01006', 'Clovis West', 'Fresno', 'N', 'Clovis Unified');
    INSERT INTO satscores VALUES
      ('01001', 120, 510, 40),
      ('01002', 45, 560, 25),
      ('01003', 30, 480, 6),
      ('01004', 150, 470, 30),
      ('01005', 60, 590, 42),
      ('01006', 200, 530, 90);
  )");
  write_text(dir / "schools.docs.jsonl",
             R"({"id": "t_schools", "kind": "table", "text": "schools lists every California school with its county and district"}
{"id": "t_satscores", "kind": "table", "text": "satscores holds SAT results per school keyed by cds"}
{"id": "c_charter", "kind": "column", "text": "charter is Y for charter schools and N otherwise"}
{"id": "c_numge1500", "kind": "column", "text": "numge1500 counts test takers scoring at least 1500"}
{"id": "r_excellence", "kind": "rule", "text": "excellence rate is numge1500 divided by numtsttakr"}
)");
  write_text(dir / "schools.evidence.jsonl",
             R"({"nl_term": "charter schools", "table": "schools", "column": "charter", "db_value": "Y"}
{"nl_term": "non-charter schools", "table": "schools", "column": "charter", "db_value": "N"}
{"nl_term": "Fresno County", "table": "schools", "column": "county", "db_value": "Fresno"}
{"nl_term": "Alameda County", "table": "schools", "column": "county", "db_value": "Alameda"}
)");
  return db;
}

fs::path make_financial_db(const fs::path& root) {
  const fs::path dir = root / "financial";
  fs::create_directories(dir);
  const fs::path db = dir / "financial.sqlite";
  exec_script(db, R"(
    CREATE TABLE district (
      district_id INTEGER PRIMARY KEY,
      a2 TEXT,
      a3 TEXT
    );
    CREATE TABLE account (
      account_id INTEGER PRIMARY KEY,
      district_id INTEGER REFERENCES district(district_id),
      frequency TEXT
    );
    INSERT INTO district VALUES
      (1, 'Hl.m. Praha', 'Prague'),
      (2, 'Pardubice', 'east Bohemia'),
      (3, 'Hradec Kralove', 'east Bohemia'),
      (4, 'Plzen', 'west Bohemia');
    INSERT INTO account VALUES
      (10, 1, 'POPLATEK MESICNE'),
      (11, 2, 'POPLATEK MESICNE'),
      (12, 2, 'POPLATEK TYDNE'),
      (13, 3, 'POPLATEK MESICNE'),
      (14, 4, 'POPLATEK PO OBRATU');
  )");
  write_text(dir / "financial.docs.jsonl",
             R"({"id": "t_district", "kind": "table", "text": "district describes regions; a3 is the region name"}
{"id": "t_account", "kind": "table", "text": "account rows belong to a district"}
)");
  write_text(dir / "financial.evidence.jsonl",
             R"({"nl_term": "East Bohemia", "table": "district", "column": "a3", "db_value": "east Bohemia"}
{"nl_term": "West Bohemia", "table": "district", "column": "a3", "db_value": "west Bohemia"}
{"nl_term": "monthly issuance", "table": "account", "column": "frequency", "db_value": "POPLATEK MESICNE"}
)");
  return db;
}

std::string simple_plan(const std::vector<std::string>& output_columns,
                        const std::vector<std::string>& entity_bindings) {
  std::string out = "```plan\nENTITIES\n";
  for (std::size_t i = 0; i < entity_bindings.size(); ++i) {
    out += "entity " + std::to_string(i) + "\t" + entity_bindings[i] + "\t-\n";
  }
  out += "CONDITIONS\nSTEPS\ns1\tanswer the question\t-\t-\nOUTPUT\n";
  for (const auto& c : output_columns) out += "column\t" + c + "\n";
  out += "```\n";
  return out;
}

std::string fenced_sql(const std::string& sql) { return "```sql\n" + sql + "\n```"; }

PipelineBackends scripted_backends(std::map<std::string, std::vector<std::string>> decomposer,
                                   std::map<std::string, std::vector<std::string>> primary,
                                   std::map<std::string, std::vector<std::string>> fallback,
                                   Pricing fallback_pricing) {
  PipelineBackends b;
  b.decomposer = scripted_backend(std::move(decomposer), Role::Decomposer, "local-decomposer");
  b.primary = scripted_backend(std::move(primary), Role::PrimaryGenerator, "local-generator");
  b.fallback = scripted_backend(std::move(fallback), Role::FallbackGenerator, "remote-generator");
  b.fallback.pricing = fallback_pricing;
  b.embedder.name = "local-embedder";
  b.embedder.role = Role::Embedder;
  b.embedder.endpoint = "scripted";
  b.embedder.model = "scripted";
  b.embedder.dimension = 32;
  return b;
}

}  // namespace nlsql::testing
