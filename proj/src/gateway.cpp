#include "nlsql/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "nlsql/errors.hpp"

namespace nlsql {

using json = nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Decomposer: return "decomposer";
    case Role::PrimaryGenerator: return "primary_generator";
    case Role::FallbackGenerator: return "fallback_generator";
    case Role::Embedder: return "embedder";
  }
  return "unknown";
}

Role role_from_string(std::string_view text) {
  for (Role r : {Role::Decomposer, Role::PrimaryGenerator, Role::FallbackGenerator, Role::Embedder}) {
    if (to_string(r) == text) return r;
  }
  throw ConfigError("unknown backend role '" + std::string(text) + "'");
}

std::string_view to_string(Route route) {
  switch (route) {
    case Route::LocalOnly: return "local";
    case Route::FallbackUsed: return "fallback";
    case Route::Failed: return "failed";
  }
  return "unknown";
}

Money Money::from_dollars(double dollars) {
  return Money(static_cast<std::int64_t>(std::llround(dollars * 1e12)));
}

std::string Money::to_string(int decimals) const {
  // Round half away from zero at the requested precision, in integer space.
  std::int64_t scale = 1;
  for (int i = decimals; i < 12; ++i) scale *= 10;
  const bool negative = pico_ < 0;
  std::int64_t magnitude = negative ? -pico_ : pico_;
  std::int64_t units = (magnitude + scale / 2) / scale;
  std::int64_t denom = 1;
  for (int i = 0; i < decimals; ++i) denom *= 10;
  std::ostringstream out;
  if (negative && units != 0) out << '-';
  out << units / denom;
  if (decimals > 0) out << '.' << std::setw(decimals) << std::setfill('0') << units % denom;
  return out.str();
}

namespace {

std::int64_t picodollars_per_token(double per_million) {
  if (per_million < 0.0) throw ConfigError("pricing rates must be non-negative");
  return static_cast<std::int64_t>(std::llround(per_million * 1e6));
}

}  // namespace

Money Pricing::cost(const TokenUsage& usage) const {
  return Money::from_picodollars(usage.input_tokens * picodollars_per_token(input_per_million) +
                                 usage.output_tokens * picodollars_per_token(output_per_million));
}

std::int64_t whitespace_token_count(std::string_view text) {
  std::int64_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

ScriptedFixtures::ScriptedFixtures(std::map<std::string, std::vector<std::string>> responses)
    : responses_(std::move(responses)) {
  if (responses_.empty()) throw ValidationError("scripted backend needs at least one fixture");
  for (const auto& [key, list] : responses_) {
    if (list.empty()) throw ValidationError("fixture '" + key + "' has no responses");
  }
}

std::string ScriptedFixtures::respond(std::string_view prompt) {
  std::lock_guard lock(mu_);
  const std::string* chosen = nullptr;
  if (auto it = responses_.find(std::string(prompt)); it != responses_.end()) {
    chosen = &it->first;
  } else {
    // std::map iterates keys in ascending order, so the first longest hit wins.
    for (const auto& [key, _] : responses_) {
      if (key.empty() || prompt.find(key) == std::string_view::npos) continue;
      if (chosen == nullptr || key.size() > chosen->size()) chosen = &key;
    }
  }
  if (chosen == nullptr) {
    std::string shown(prompt.substr(0, 120));
    if (prompt.size() > 120) shown += "...";
    throw ProtocolError("scripted backend has no fixture for prompt key '" + shown + "'");
  }
  const auto& list = responses_.at(*chosen);
  std::size_t& pos = cursor_[*chosen];
  const std::string& answer = list[std::min(pos, list.size() - 1)];
  ++pos;
  ++calls_;
  return answer;
}

std::size_t ScriptedFixtures::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

BackendSpec scripted_backend(std::map<std::string, std::vector<std::string>> fixtures, Role role,
                             std::string name) {
  BackendSpec spec;
  spec.name = std::move(name);
  spec.role = role;
  spec.endpoint = "scripted";
  spec.model = "scripted";
  spec.script = std::make_shared<ScriptedFixtures>(std::move(fixtures));
  return spec;
}

BackendSpec scripted_backend(const std::map<std::string, std::string>& fixtures, Role role,
                             std::string name) {
  std::map<std::string, std::vector<std::string>> expanded;
  for (const auto& [key, value] : fixtures) expanded[key] = {value};
  return scripted_backend(std::move(expanded), role, std::move(name));
}

std::map<std::string, std::vector<std::string>> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixtures file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("fixtures file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("fixtures file " + path + " must hold an object");
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_string()) {
      out[key] = {value.get<std::string>()};
    } else if (value.is_array()) {
      out[key] = value.get<std::vector<std::string>>();
    } else {
      throw ConfigError("fixture '" + key + "' must be a string or an array of strings");
    }
  }
  return out;
}

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' is not a URL");
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.scheme_host_port = url;
  } else {
    ep.scheme_host_port = url.substr(0, path_start);
    ep.path_prefix = url.substr(path_start);
  }
  while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  return ep;
}

json post_json(const BackendSpec& backend, const std::string& route, const json& body) {
  const Endpoint ep = split_endpoint(backend.endpoint);
  httplib::Client client(ep.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(backend.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(backend.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!backend.bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + backend.bearer_token);
  }
  auto res = client.Post(ep.path_prefix + route, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("transport error contacting " + backend.endpoint + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    throw TransportError("backend " + backend.name + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError("backend " + backend.name + " returned HTTP " + std::to_string(res->status) +
                        ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw ProtocolError("backend " + backend.name + " sent malformed JSON: " + e.what());
  }
}

}  // namespace

Completion complete(const BackendSpec& backend, const std::string& prompt,
                    const GenerationParams& params) {
  if (prompt.empty()) throw ValidationError("prompt must not be empty");
  const auto start = std::chrono::steady_clock::now();
  Completion out;
  if (backend.is_scripted()) {
    if (!backend.script) throw ConfigError("scripted backend " + backend.name + " has no fixtures");
    out.text = backend.script->respond(prompt);
    out.usage = {whitespace_token_count(prompt), whitespace_token_count(out.text)};
  } else {
    json messages = json::array();
    if (!params.system.empty()) messages.push_back({{"role", "system"}, {"content", params.system}});
    messages.push_back({{"role", "user"}, {"content", prompt}});
    const json request = {{"model", backend.model},
                          {"messages", messages},
                          {"temperature", params.temperature},
                          {"max_tokens", params.max_tokens}};
    const json response = post_json(backend, "/chat/completions", request);
    try {
      out.text = response.at("choices").at(0).at("message").at("content").get<std::string>();
      const auto& usage = response.at("usage");
      out.usage.input_tokens = usage.at("prompt_tokens").get<std::int64_t>();
      out.usage.output_tokens = usage.at("completion_tokens").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw ProtocolError("backend " + backend.name + " response missing fields: " + e.what());
    }
    if (out.usage.input_tokens < 0 || out.usage.output_tokens < 0) {
      throw ProtocolError("backend " + backend.name + " reported negative token usage");
    }
  }
  out.latency = std::chrono::steady_clock::now() - start;
  return out;
}

std::vector<float> request_embedding(const BackendSpec& backend, const std::string& text) {
  const json response =
      post_json(backend, "/embeddings", {{"model", backend.model}, {"input", text}});
  try {
    return response.at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const json::exception& e) {
    throw ProtocolError("embedder " + backend.name + " response missing fields: " + e.what());
  }
}

CostLedger::CostLedger(const CostLedger& other) {
  std::lock_guard lock(other.mu_);
  entries_ = other.entries_;
  per_query_ = other.per_query_;
}

CostLedger& CostLedger::operator=(const CostLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = other.entries_;
  per_query_ = other.per_query_;
  return *this;
}

Money CostLedger::record_usage(const std::string& query_id, const BackendSpec& backend,
                               const TokenUsage& usage) {
  if (usage.input_tokens < 0 || usage.output_tokens < 0) {
    throw ValidationError("token usage must be non-negative");
  }
  const Money cost = backend.pricing.cost(usage);
  std::lock_guard lock(mu_);
  entries_.push_back({query_id, backend.name, backend.role, backend.pricing, usage, cost});
  return cost;
}

QueryCost CostLedger::close_query(const std::string& query_id, Route route) {
  std::lock_guard lock(mu_);
  Money sum;
  for (const auto& e : entries_) {
    if (e.query_id == query_id) sum += e.cost;
  }
  per_query_.push_back({query_id, route, sum});
  return per_query_.back();
}

Money CostLedger::total() const {
  std::lock_guard lock(mu_);
  Money sum;
  for (const auto& e : entries_) sum += e.cost;
  return sum;
}

Money CostLedger::query_cost(const std::string& query_id) const {
  std::lock_guard lock(mu_);
  Money sum;
  for (const auto& e : entries_) {
    if (e.query_id == query_id) sum += e.cost;
  }
  return sum;
}

std::map<std::string, BackendTotals> CostLedger::per_backend() const {
  std::lock_guard lock(mu_);
  std::map<std::string, BackendTotals> out;
  for (const auto& e : entries_) {
    auto& slot = out[e.backend];
    slot.usage += e.usage;
    slot.cost += e.cost;
  }
  return out;
}

std::vector<LedgerEntry> CostLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::vector<QueryCost> CostLedger::per_query() const {
  std::lock_guard lock(mu_);
  return per_query_;
}

Money CostLedger::reprice(const Pricing& pricing) const {
  std::lock_guard lock(mu_);
  Money sum;
  for (const auto& e : entries_) sum += pricing.cost(e.usage);
  return sum;
}

Completion complete_with_retry(const BackendSpec& backend, const std::string& prompt,
                               const GenerationParams& params, TokenUsage& usage, int& calls) {
  try {
    ++calls;
    auto c = complete(backend, prompt, params);
    usage += c.usage;
    return c;
  } catch (const TransportError&) {
    ++calls;
    auto c = complete(backend, prompt, params);
    usage += c.usage;
    return c;
  }
}

}  // namespace nlsql
