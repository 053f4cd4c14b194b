#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nlsql/gateway.hpp"
#include "nlsql/question.hpp"

namespace nlsql {

struct ColumnInfo {
  std::string name;
  std::string declared_type;
  bool nullable = true;

  friend bool operator==(const ColumnInfo&, const ColumnInfo&) = default;
};

struct TableInfo {
  std::string name;
  std::vector<ColumnInfo> columns;

  /// Case-insensitive lookup, as SQLite resolves identifiers.
  const ColumnInfo* find_column(std::string_view column) const;
  friend bool operator==(const TableInfo&, const TableInfo&) = default;
};

struct ForeignKey {
  std::string from_table;
  std::string from_column;
  std::string to_table;
  std::string to_column;

  friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct SchemaCatalog {
  std::vector<TableInfo> tables;
  std::map<std::string, std::vector<std::string>> primary_keys;  // table -> columns in key order
  std::vector<ForeignKey> foreign_keys;

  const TableInfo* find_table(std::string_view table) const;
  bool has_column(std::string_view table, std::string_view column) const;
  /// Compact text rendering used in prompts.
  std::string summary() const;

  friend bool operator==(const SchemaCatalog&, const SchemaCatalog&) = default;
};

/// Reads table, column, primary-key and foreign-key metadata from an SQLite
/// file opened read-only. Throws ExtractionError on unreadable or corrupt files.
SchemaCatalog introspect_schema(const std::filesystem::path& db_file);

enum class SegmentKind { TableMeaning, ColumnDefinition, BusinessRule };

std::string_view to_string(SegmentKind kind);

struct DocSegment {
  std::string id;
  std::string text;
  SegmentKind kind = SegmentKind::TableMeaning;
  std::vector<float> embedding;

  friend bool operator==(const DocSegment&, const DocSegment&) = default;
};

struct EvidenceEntry {
  std::string nl_term;
  std::string table;
  std::string column;
  std::string db_value;

  friend bool operator==(const EvidenceEntry&, const EvidenceEntry&) = default;
};

struct EvidenceMap {
  std::vector<EvidenceEntry> entries;

  friend bool operator==(const EvidenceMap&, const EvidenceMap&) = default;
};

/// Reads `<db_id>.docs.jsonl`: {"id", "kind": table|column|rule, "text"} per line.
std::vector<DocSegment> load_docs(const std::filesystem::path& path);
/// Reads `<db_id>.evidence.jsonl`: {"nl_term", "table", "column", "db_value"} per line.
EvidenceMap load_evidence(const std::filesystem::path& path);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Jaccard index of the lower-cased alphanumeric word sets of two texts.
double lexical_overlap(std::string_view a, std::string_view b);

/// Deterministic unit vector seeded from a hash of `text`.
std::vector<float> hashed_unit_vector(std::string_view text, std::size_t dimension);

/// Embeds text with the given backend. Scripted embedders return
/// hashed_unit_vector(text, backend.dimension).
std::vector<float> embed(const BackendSpec& embedder, const std::string& text);

struct ScoredSegment {
  DocSegment segment;
  double cosine = 0.0;
  double lexical = 0.0;
  double score = 0.0;  // cosine after retrieval, blended score after re-ranking

  friend bool operator==(const ScoredSegment&, const ScoredSegment&) = default;
};

/// Exact cosine nearest-neighbour store over documentation segments.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return segments_.size(); }
  const std::vector<DocSegment>& segments() const { return segments_; }

  /// Throws ValidationError on a dimension mismatch or a zero vector.
  void add(DocSegment segment);

  /// The k most cosine-similar segments, descending; ties by id ascending.
  std::vector<ScoredSegment> retrieve(std::span<const float> query, std::size_t k) const;

  /// Embedding cache: "NLSQEMB1", dim u32, count u32, count*dim f32, then
  /// count ids as u32 length + UTF-8 bytes. All little-endian.
  void save_cache(const std::filesystem::path& path) const;

  /// Attaches cached embeddings to `docs` (matched by id). Throws
  /// ExtractionError when the file is malformed or does not cover the docs.
  static VectorStore from_cache(const std::filesystem::path& path, std::vector<DocSegment> docs);

  /// Embeds every doc with `embedder`.
  static VectorStore build(const BackendSpec& embedder, std::vector<DocSegment> docs);

 private:
  std::size_t dimension_;
  std::vector<DocSegment> segments_;
};

struct RetrievalConfig {
  std::size_t k = 10;
  double cosine_weight = 0.7;
  double lexical_weight = 0.3;
  double score_threshold = 0.2;
  std::size_t keep = 5;

  friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

/// Blends score = w_cos * cosine + w_lex * lexical_overlap(text, query), drops
/// scores below the threshold, re-sorts (ties by id) and keeps the top `keep`.
std::vector<ScoredSegment> rerank_filter(std::vector<ScoredSegment> segments,
                                         std::string_view query_text,
                                         const RetrievalConfig& config = {});

struct SchemaContext {
  SchemaCatalog catalog;
  std::vector<ScoredSegment> segments;
  EvidenceMap evidence;
  std::chrono::nanoseconds retrieval_latency{0};
  std::vector<std::string> warnings;

  friend bool operator==(const SchemaContext&, const SchemaContext&) = default;
};

/// Assembles the context handed to the decomposer. Evidence entries naming a
/// table or column missing from the catalog are dropped with a warning.
SchemaContext build_context(SchemaCatalog catalog, std::vector<ScoredSegment> segments,
                            const EvidenceMap& evidence, const Question& question,
                            std::chrono::nanoseconds retrieval_latency = {});

/// Everything the extractor needs for one database, loaded once and shared
/// read-only between queries.
struct DatabaseResources {
  std::string db_id;
  std::filesystem::path db_file;
  SchemaCatalog catalog;
  VectorStore store{64};
  EvidenceMap evidence;
};

/// Loads catalog, docs (embedding cache when present and current, otherwise
/// embedded on the fly) and evidence for `db_id`. Missing side files yield
/// empty docs/evidence.
DatabaseResources load_database_resources(const DatabaseRegistry& registry,
                                          const std::string& db_id, const BackendSpec& embedder);

/// Writes the embedding cache for `db_id`. Returns the number of segments.
/// Throws ConfigError naming the expected docs path when it is missing.
std::size_t build_index(const DatabaseRegistry& registry, const std::string& db_id,
                        const BackendSpec& embedder, std::vector<std::string>* warnings = nullptr);

/// Runs embed -> retrieve -> rerank -> build_context for a question.
SchemaContext extract_context(const Question& question, const DatabaseResources& resources,
                              const BackendSpec& embedder, const RetrievalConfig& config);

}  // namespace nlsql
