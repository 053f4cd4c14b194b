#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "nlsql/errors.hpp"
#include "nlsql/schema.hpp"
#include "nlsql/sql.hpp"

namespace nlsql {

using json = nlohmann::json;

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::TableMeaning: return "table";
    case SegmentKind::ColumnDefinition: return "column";
    case SegmentKind::BusinessRule: return "rule";
  }
  return "unknown";
}

namespace {

SegmentKind segment_kind_from(const std::string& text, const std::string& where) {
  if (text == "table") return SegmentKind::TableMeaning;
  if (text == "column") return SegmentKind::ColumnDefinition;
  if (text == "rule") return SegmentKind::BusinessRule;
  throw ExtractionError(where + ": unknown segment kind '" + text + "'");
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ExtractionError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      fn(json::parse(line), where);
    } catch (const json::exception& e) {
      throw ExtractionError(where + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<DocSegment> load_docs(const std::filesystem::path& path) {
  std::vector<DocSegment> docs;
  std::set<std::string> seen;
  for_each_json_line(path, [&](const json& rec, const std::string& where) {
    DocSegment seg;
    seg.id = rec.at("id").get<std::string>();
    seg.kind = segment_kind_from(rec.at("kind").get<std::string>(), where);
    seg.text = rec.at("text").get<std::string>();
    if (seg.text.empty()) throw ExtractionError(where + ": empty documentation text");
    if (!seen.insert(seg.id).second) throw ExtractionError(where + ": duplicate segment id '" + seg.id + "'");
    docs.push_back(std::move(seg));
  });
  return docs;
}

EvidenceMap load_evidence(const std::filesystem::path& path) {
  EvidenceMap map;
  for_each_json_line(path, [&](const json& rec, const std::string&) {
    map.entries.push_back({rec.at("nl_term").get<std::string>(), rec.at("table").get<std::string>(),
                           rec.at("column").get<std::string>(), rec.at("db_value").get<std::string>()});
  });
  return map;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("cosine similarity of vectors with different dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.insert(std::move(cur));
  return words;
}

}  // namespace

double lexical_overlap(std::string_view a, std::string_view b) {
  const auto wa = word_set(a);
  const auto wb = word_set(b);
  if (wa.empty() && wb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : wa) common += wb.count(w);
  return static_cast<double>(common) / static_cast<double>(wa.size() + wb.size() - common);
}

std::vector<float> hashed_unit_vector(std::string_view text, std::size_t dimension) {
  // FNV-1a; std::mt19937_64 output is fully specified, so vectors are
  // identical across platforms and standard libraries.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::mt19937_64 gen(h);
  std::vector<float> v(dimension);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
      x = static_cast<float>(2.0 * u - 1.0);
      norm += static_cast<double>(x) * x;
    }
  } while (norm == 0.0);
  const double inv = 1.0 / std::sqrt(norm);
  for (auto& x : v) x = static_cast<float>(x * inv);
  return v;
}

std::vector<float> embed(const BackendSpec& embedder, const std::string& text) {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  if (embedder.is_scripted()) return hashed_unit_vector(text, embedder.dimension);
  auto v = request_embedding(embedder, text);
  if (v.size() != embedder.dimension) {
    throw ProtocolError("embedder " + embedder.name + " returned dimension " + std::to_string(v.size()) +
                        ", expected " + std::to_string(embedder.dimension));
  }
  return v;
}

void VectorStore::add(DocSegment segment) {
  if (segment.embedding.size() != dimension_) {
    throw ValidationError("segment '" + segment.id + "' has dimension " +
                          std::to_string(segment.embedding.size()) + ", store expects " +
                          std::to_string(dimension_));
  }
  if (!segment.text.empty() &&
      std::all_of(segment.embedding.begin(), segment.embedding.end(), [](float x) { return x == 0.0f; })) {
    throw ValidationError("segment '" + segment.id + "' has a zero embedding");
  }
  segments_.push_back(std::move(segment));
}

namespace {

bool ranks_before(const ScoredSegment& a, const ScoredSegment& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.segment.id < b.segment.id;
}

}  // namespace

std::vector<ScoredSegment> VectorStore::retrieve(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw ValidationError("retrieve needs k >= 1");
  if (query.size() != dimension_) {
    throw ValidationError("query has dimension " + std::to_string(query.size()) + ", store expects " +
                          std::to_string(dimension_));
  }
  std::vector<ScoredSegment> scored;
  scored.reserve(segments_.size());
  for (const auto& seg : segments_) {
    const double cos = cosine_similarity(query, seg.embedding);
    scored.push_back({seg, cos, 0.0, cos});
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    ranks_before);
  scored.resize(take);
  return scored;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ExtractionError("truncated embedding cache " + path.string());
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

constexpr char kMagic[8] = {'N', 'L', 'S', 'Q', 'E', 'M', 'B', '1'};

}  // namespace

void VectorStore::save_cache(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExtractionError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(dimension_));
  put_u32(out, static_cast<std::uint32_t>(segments_.size()));
  for (const auto& seg : segments_) {
    for (float f : seg.embedding) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  for (const auto& seg : segments_) {
    put_u32(out, static_cast<std::uint32_t>(seg.id.size()));
    out.write(seg.id.data(), static_cast<std::streamsize>(seg.id.size()));
  }
  if (!out) throw ExtractionError("failed writing " + path.string());
}

VectorStore VectorStore::from_cache(const std::filesystem::path& path, std::vector<DocSegment> docs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExtractionError("cannot open embedding cache " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ExtractionError("bad embedding cache header in " + path.string());
  }
  const std::uint32_t dim = get_u32(in, path);
  const std::uint32_t count = get_u32(in, path);
  std::vector<std::vector<float>> vectors(count, std::vector<float>(dim));
  for (auto& v : vectors) {
    for (auto& f : v) {
      const std::uint32_t bits = get_u32(in, path);
      std::memcpy(&f, &bits, sizeof f);
    }
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, path);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw ExtractionError("truncated embedding cache " + path.string());
    index.emplace(std::move(id), i);
  }
  if (docs.size() != count) {
    throw ExtractionError("embedding cache " + path.string() + " holds " + std::to_string(count) +
                          " segments, docs file has " + std::to_string(docs.size()));
  }
  VectorStore store(dim);
  for (auto& doc : docs) {
    auto it = index.find(doc.id);
    if (it == index.end()) {
      throw ExtractionError("embedding cache " + path.string() + " lacks segment '" + doc.id + "'");
    }
    doc.embedding = vectors[it->second];
    store.add(std::move(doc));
  }
  return store;
}

VectorStore VectorStore::build(const BackendSpec& embedder, std::vector<DocSegment> docs) {
  VectorStore store(embedder.dimension);
  for (auto& doc : docs) {
    doc.embedding = embed(embedder, doc.text);
    store.add(std::move(doc));
  }
  return store;
}

std::vector<ScoredSegment> rerank_filter(std::vector<ScoredSegment> segments, std::string_view query_text,
                                         const RetrievalConfig& config) {
  std::vector<ScoredSegment> kept;
  for (auto& s : segments) {
    s.lexical = lexical_overlap(s.segment.text, query_text);
    s.score = config.cosine_weight * s.cosine + config.lexical_weight * s.lexical;
    if (s.score >= config.score_threshold) kept.push_back(std::move(s));
  }
  std::sort(kept.begin(), kept.end(), ranks_before);
  if (kept.size() > config.keep) kept.resize(config.keep);
  return kept;
}

SchemaContext build_context(SchemaCatalog catalog, std::vector<ScoredSegment> segments,
                            const EvidenceMap& evidence, const Question& question,
                            std::chrono::nanoseconds retrieval_latency) {
  SchemaContext ctx;
  for (const auto& e : evidence.entries) {
    if (!catalog.has_column(e.table, e.column)) {
      const std::string msg = "dropping evidence '" + e.nl_term + "': " + e.table + "." + e.column +
                              " is not in database " + question.db_id;
      spdlog::warn("{}", msg);
      ctx.warnings.push_back(msg);
      continue;
    }
    ctx.evidence.entries.push_back(e);
  }
  ctx.catalog = std::move(catalog);
  ctx.segments = std::move(segments);
  ctx.retrieval_latency = retrieval_latency;
  return ctx;
}

DatabaseResources load_database_resources(const DatabaseRegistry& registry, const std::string& db_id,
                                          const BackendSpec& embedder) {
  DatabaseResources res;
  res.db_id = db_id;
  res.db_file = registry.database_file(db_id);
  res.catalog = introspect_schema(res.db_file);

  const auto docs_path = registry.docs_file(db_id);
  std::vector<DocSegment> docs;
  if (std::filesystem::exists(docs_path)) docs = load_docs(docs_path);

  const auto cache_path = registry.embedding_cache(db_id);
  bool loaded = false;
  if (std::filesystem::exists(cache_path)) {
    try {
      auto store = VectorStore::from_cache(cache_path, docs);
      if (store.dimension() == embedder.dimension) {
        res.store = std::move(store);
        loaded = true;
      } else {
        spdlog::warn("embedding cache {} has dimension {}, embedder uses {}; re-embedding",
                     cache_path.string(), store.dimension(), embedder.dimension);
      }
    } catch (const ExtractionError& e) {
      spdlog::warn("{}; re-embedding", e.what());
    }
  }
  if (!loaded) res.store = VectorStore::build(embedder, std::move(docs));

  const auto evidence_path = registry.evidence_file(db_id);
  if (std::filesystem::exists(evidence_path)) res.evidence = load_evidence(evidence_path);
  return res;
}

std::size_t build_index(const DatabaseRegistry& registry, const std::string& db_id,
                        const BackendSpec& embedder, std::vector<std::string>* warnings) {
  registry.database_file(db_id);
  const auto docs_path = registry.docs_file(db_id);
  if (!std::filesystem::exists(docs_path)) {
    throw ConfigError("documentation file not found: " + docs_path.string());
  }
  if (!std::filesystem::exists(registry.evidence_file(db_id))) {
    const std::string msg = "no evidence file at " + registry.evidence_file(db_id).string() +
                            "; continuing without evidence mappings";
    spdlog::warn("{}", msg);
    if (warnings) warnings->push_back(msg);
  }
  const auto store = VectorStore::build(embedder, load_docs(docs_path));
  store.save_cache(registry.embedding_cache(db_id));
  return store.size();
}

SchemaContext extract_context(const Question& question, const DatabaseResources& resources,
                              const BackendSpec& embedder, const RetrievalConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<ScoredSegment> segments;
  if (resources.store.size() > 0) {
    const auto query = embed(embedder, question.text);
    segments = rerank_filter(resources.store.retrieve(query, config.k), question.text, config);
  }
  const auto latency = std::chrono::steady_clock::now() - start;
  return build_context(resources.catalog, std::move(segments), resources.evidence, question,
                       std::chrono::duration_cast<std::chrono::nanoseconds>(latency));
}

}  // namespace nlsql
