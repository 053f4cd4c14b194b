#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace nlsql {

enum class Role { Decomposer, PrimaryGenerator, FallbackGenerator, Embedder };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

/// How a query was answered.
enum class Route { LocalOnly, FallbackUsed, Failed };

std::string_view to_string(Route route);

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& other) {
    input_tokens += other.input_tokens;
    output_tokens += other.output_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// Exact currency amount in picodollars (1e-12 USD).
///
/// A per-token price quoted in dollars per million tokens is a whole number of
/// picodollars per token as long as it has at most six decimals, so ledger
/// sums stay exact and independent of the order of recording.
class Money {
 public:
  constexpr Money() = default;
  static constexpr Money from_picodollars(std::int64_t pico) { return Money(pico); }
  static Money from_dollars(double dollars);

  constexpr std::int64_t picodollars() const { return pico_; }
  double dollars() const { return static_cast<double>(pico_) / 1e12; }
  /// Fixed-point rendering, 4 decimals by default.
  std::string to_string(int decimals = 4) const;

  Money& operator+=(Money other) {
    pico_ += other.pico_;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return a += b; }
  friend Money operator-(Money a, Money b) { return Money(a.pico_ - b.pico_); }
  friend auto operator<=>(const Money&, const Money&) = default;

 private:
  constexpr explicit Money(std::int64_t pico) : pico_(pico) {}
  std::int64_t pico_ = 0;
};

struct Pricing {
  double input_per_million = 0.0;   // USD per 1,000,000 input tokens
  double output_per_million = 0.0;  // USD per 1,000,000 output tokens

  Money cost(const TokenUsage& usage) const;
  bool is_free() const { return input_per_million == 0.0 && output_per_million == 0.0; }
  friend bool operator==(const Pricing&, const Pricing&) = default;
};

/// Fixture table for the deterministic scripted backend.
///
/// A prompt is answered by the fixture whose key equals the prompt, or failing
/// that by the longest key contained in the prompt (ties: smallest key). Keys
/// with several responses answer them in order and then repeat the last one.
class ScriptedFixtures {
 public:
  explicit ScriptedFixtures(std::map<std::string, std::vector<std::string>> responses);

  std::string respond(std::string_view prompt);
  const std::map<std::string, std::vector<std::string>>& responses() const { return responses_; }
  /// Number of prompts answered so far, across all keys.
  std::size_t calls() const;

 private:
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> cursor_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

struct BackendSpec {
  std::string name;
  Role role = Role::PrimaryGenerator;
  std::string endpoint;  // base URL, or "scripted"
  std::string model;
  Pricing pricing;
  std::chrono::milliseconds timeout{60000};
  std::size_t dimension = 64;  // embedders only
  std::string fixtures_path;   // config reference for scripted backends
  std::string bearer_token;    // filled from the environment, never serialized
  std::shared_ptr<ScriptedFixtures> script;

  bool is_scripted() const { return endpoint == "scripted"; }
};

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string system;
};

struct Completion {
  std::string text;
  TokenUsage usage;
  std::chrono::nanoseconds latency{0};
};

/// Number of whitespace-separated tokens; the scripted backend's usage counter.
std::int64_t whitespace_token_count(std::string_view text);

/// Sends `prompt` to the backend. Throws TransportError on timeout or
/// connection failure, ProtocolError on an unusable response or fixture miss.
Completion complete(const BackendSpec& backend, const std::string& prompt,
                    const GenerationParams& params = {});

/// complete() with one retry on TransportError. Every call made is counted
/// in `calls` and its usage added to `usage`.
Completion complete_with_retry(const BackendSpec& backend, const std::string& prompt,
                               const GenerationParams& params, TokenUsage& usage, int& calls);

/// Embedding request against an HTTP backend (`POST {endpoint}/embeddings`).
std::vector<float> request_embedding(const BackendSpec& backend, const std::string& text);

BackendSpec scripted_backend(std::map<std::string, std::vector<std::string>> fixtures,
                             Role role = Role::PrimaryGenerator, std::string name = "scripted");
BackendSpec scripted_backend(const std::map<std::string, std::string>& fixtures,
                             Role role = Role::PrimaryGenerator, std::string name = "scripted");

/// Loads a fixtures JSON object: {"key": "response"} or {"key": ["r1", "r2"]}.
std::map<std::string, std::vector<std::string>> load_fixtures(const std::string& path);

struct LedgerEntry {
  std::string query_id;
  std::string backend;
  Role role;
  Pricing pricing;
  TokenUsage usage;
  Money cost;
};

struct BackendTotals {
  TokenUsage usage;
  Money cost;
};

struct QueryCost {
  std::string query_id;
  Route route;
  Money cost;
};

/// Append-only token and cost accounting. All members are safe to call
/// concurrently; appends are atomic.
class CostLedger {
 public:
  CostLedger() = default;
  CostLedger(const CostLedger& other);
  CostLedger& operator=(const CostLedger& other);

  /// Returns the cost charged for this usage.
  Money record_usage(const std::string& query_id, const BackendSpec& backend,
                     const TokenUsage& usage);
  /// Closes a query: appends (query_id, route, sum of that query's costs).
  QueryCost close_query(const std::string& query_id, Route route);

  Money total() const;
  Money query_cost(const std::string& query_id) const;
  std::map<std::string, BackendTotals> per_backend() const;
  std::vector<LedgerEntry> entries() const;
  std::vector<QueryCost> per_query() const;
  /// Total cost if every recorded usage had been billed at `pricing`.
  Money reprice(const Pricing& pricing) const;

 private:
  std::vector<LedgerEntry> entries_;
  std::vector<QueryCost> per_query_;
  mutable std::mutex mu_;
};

}  // namespace nlsql
