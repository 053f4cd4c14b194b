#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nlsql/cli.hpp"
#include "nlsql/errors.hpp"

namespace nlsql {

namespace {

constexpr Role kRoles[] = {Role::Decomposer, Role::PrimaryGenerator, Role::FallbackGenerator, Role::Embedder};

template <typename T>
T scalar(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config: " + path + " has an invalid value");
  }
}

template <typename T>
void read_opt(const YAML::Node& parent, const char* key, T& target, const std::string& path) {
  const YAML::Node node = parent[key];
  if (node) target = scalar<T>(node, path + key);
}

Pricing read_pricing(const YAML::Node& node, const std::string& path) {
  Pricing p;
  read_opt(node, "input_per_million", p.input_per_million, path + ".");
  read_opt(node, "output_per_million", p.output_per_million, path + ".");
  return p;
}

BackendSpec read_backend(const YAML::Node& node, Role role) {
  const std::string path = "backends." + std::string(to_string(role));
  if (!node.IsMap()) throw ConfigError("config: " + path + " must be a mapping");
  BackendSpec spec;
  spec.role = role;
  spec.name = std::string(to_string(role));
  read_opt(node, "name", spec.name, path + ".");
  read_opt(node, "endpoint", spec.endpoint, path + ".");
  read_opt(node, "model", spec.model, path + ".");
  read_opt(node, "fixtures", spec.fixtures_path, path + ".");
  if (node["timeout_ms"]) spec.timeout = std::chrono::milliseconds(scalar<std::int64_t>(node["timeout_ms"], path + ".timeout_ms"));
  if (node["dimension"]) spec.dimension = scalar<std::size_t>(node["dimension"], path + ".dimension");
  if (node["pricing"]) spec.pricing = read_pricing(node["pricing"], path + ".pricing");
  if (node["token"] || node["bearer_token"]) {
    throw ConfigError("config: " + path + " must not hold a token; set NLSQL_FALLBACK_TOKEN instead");
  }
  if (spec.endpoint.empty()) throw ConfigError("config: " + path + ".endpoint is required");
  return spec;
}

void emit_pricing(YAML::Emitter& e, const Pricing& p) {
  e << YAML::BeginMap << YAML::Key << "input_per_million" << YAML::Value << p.input_per_million << YAML::Key
    << "output_per_million" << YAML::Value << p.output_per_million << YAML::EndMap;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

}  // namespace

void AppConfig::validate() const {
  for (Role r : kRoles) {
    const auto it = backends.find(r);
    if (it == backends.end()) throw ConfigError("config: no backend bound to role " + std::string(to_string(r)));
    if (it->second.role != r) throw ConfigError("config: backend " + it->second.name + " bound to the wrong role");
  }
  if (std::fabs(retrieval.cosine_weight + retrieval.lexical_weight - 1.0) > 1e-9) {
    throw ConfigError("config: retrieval.blend_weights must sum to 1");
  }
  if (retrieval.cosine_weight < 0.0 || retrieval.lexical_weight < 0.0) {
    throw ConfigError("config: retrieval.blend_weights must be non-negative");
  }
  if (retrieval.k == 0 || retrieval.keep == 0) throw ConfigError("config: retrieval.k and keep must be positive");
  if (sandbox.timeout.count() <= 0) throw ConfigError("config: sandbox.timeout_ms must be positive");
  if (sandbox.max_rows == 0) throw ConfigError("config: sandbox.max_rows must be positive");
  if (eval.trials < 1) throw ConfigError("config: eval.trials must be at least 1");
  if (eval.workers < 1) throw ConfigError("config: eval.workers must be at least 1");
}

bool operator==(const AppConfig& a, const AppConfig& b) {
  if (a.backends.size() != b.backends.size()) return false;
  for (const auto& [role, x] : a.backends) {
    const auto it = b.backends.find(role);
    if (it == b.backends.end()) return false;
    const BackendSpec& y = it->second;
    if (x.name != y.name || x.role != y.role || x.endpoint != y.endpoint || x.model != y.model ||
        !(x.pricing == y.pricing) || x.timeout != y.timeout || x.dimension != y.dimension ||
        x.fixtures_path != y.fixtures_path) {
      return false;
    }
  }
  return a.databases_root == b.databases_root && a.prompts_dir == b.prompts_dir && a.retrieval == b.retrieval &&
         a.sandbox == b.sandbox && a.eval == b.eval && a.strict_semantic == b.strict_semantic &&
         a.baseline_pricing == b.baseline_pricing;
}

AppConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: malformed YAML: ") + e.what());
  }
  AppConfig c;
  if (root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");

  if (root["databases_root"]) c.databases_root = scalar<std::string>(root["databases_root"], "databases_root");
  if (root["prompts_dir"]) c.prompts_dir = scalar<std::string>(root["prompts_dir"], "prompts_dir");
  read_opt(root, "strict_semantic", c.strict_semantic, "");

  if (const YAML::Node r = root["retrieval"]) {
    read_opt(r, "k", c.retrieval.k, "retrieval.");
    read_opt(r, "score_threshold", c.retrieval.score_threshold, "retrieval.");
    read_opt(r, "keep", c.retrieval.keep, "retrieval.");
    if (const YAML::Node w = r["blend_weights"]) {
      if (!w.IsSequence() || w.size() != 2) throw ConfigError("config: retrieval.blend_weights must be [cosine, lexical]");
      c.retrieval.cosine_weight = scalar<double>(w[0], "retrieval.blend_weights[0]");
      c.retrieval.lexical_weight = scalar<double>(w[1], "retrieval.blend_weights[1]");
    }
  }
  if (const YAML::Node s = root["sandbox"]) {
    if (s["timeout_ms"]) c.sandbox.timeout = std::chrono::milliseconds(scalar<std::int64_t>(s["timeout_ms"], "sandbox.timeout_ms"));
    read_opt(s, "max_rows", c.sandbox.max_rows, "sandbox.");
  }
  if (const YAML::Node e = root["eval"]) {
    read_opt(e, "trials", c.eval.trials, "eval.");
    read_opt(e, "workers", c.eval.workers, "eval.");
  }
  if (const YAML::Node p = root["baseline_pricing"]) c.baseline_pricing = read_pricing(p, "baseline_pricing");
  if (const YAML::Node b = root["backends"]) {
    if (!b.IsMap()) throw ConfigError("config: backends must be a mapping of role to backend");
    for (const auto& entry : b) {
      const Role role = role_from_string(scalar<std::string>(entry.first, "backends key"));
      c.backends[role] = read_backend(entry.second, role);
    }
  }
  return c;
}

std::string serialize_config(const AppConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "databases_root" << YAML::Value << c.databases_root.string();
  if (!c.prompts_dir.empty()) e << YAML::Key << "prompts_dir" << YAML::Value << c.prompts_dir.string();
  e << YAML::Key << "strict_semantic" << YAML::Value << c.strict_semantic;

  e << YAML::Key << "retrieval" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "k" << YAML::Value << c.retrieval.k;
  e << YAML::Key << "blend_weights" << YAML::Value << YAML::Flow << YAML::BeginSeq << c.retrieval.cosine_weight
    << c.retrieval.lexical_weight << YAML::EndSeq;
  e << YAML::Key << "score_threshold" << YAML::Value << c.retrieval.score_threshold;
  e << YAML::Key << "keep" << YAML::Value << c.retrieval.keep;
  e << YAML::EndMap;

  e << YAML::Key << "sandbox" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "timeout_ms" << YAML::Value << static_cast<std::int64_t>(c.sandbox.timeout.count());
  e << YAML::Key << "max_rows" << YAML::Value << c.sandbox.max_rows;
  e << YAML::EndMap;

  e << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "trials" << YAML::Value << c.eval.trials;
  e << YAML::Key << "workers" << YAML::Value << c.eval.workers;
  e << YAML::EndMap;

  if (c.baseline_pricing) {
    e << YAML::Key << "baseline_pricing" << YAML::Value;
    emit_pricing(e, *c.baseline_pricing);
  }

  e << YAML::Key << "backends" << YAML::Value << YAML::BeginMap;
  for (const auto& [role, spec] : c.backends) {
    e << YAML::Key << std::string(to_string(role)) << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << spec.name;
    e << YAML::Key << "endpoint" << YAML::Value << spec.endpoint;
    e << YAML::Key << "model" << YAML::Value << spec.model;
    e << YAML::Key << "timeout_ms" << YAML::Value << static_cast<std::int64_t>(spec.timeout.count());
    if (role == Role::Embedder) e << YAML::Key << "dimension" << YAML::Value << spec.dimension;
    if (!spec.fixtures_path.empty()) e << YAML::Key << "fixtures" << YAML::Value << spec.fixtures_path;
    e << YAML::Key << "pricing" << YAML::Value;
    emit_pricing(e, spec.pricing);
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  AppConfig c = parse_config(text.str());
  const auto base = path.parent_path();
  c.databases_root = resolve(base, c.databases_root);
  c.prompts_dir = resolve(base, c.prompts_dir);
  for (auto& [role, spec] : c.backends) {
    if (!spec.fixtures_path.empty()) spec.fixtures_path = resolve(base, spec.fixtures_path).string();
  }
  return c;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

namespace {

int env_int(const std::string& name, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("environment variable " + name + " must be an integer, got '" + value + "'");
  }
}

bool env_bool(const std::string& name, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off" || value.empty()) return false;
  throw ConfigError("environment variable " + name + " must be a boolean, got '" + value + "'");
}

}  // namespace

void apply_env(AppConfig& c, const EnvLookup& env) {
  if (auto v = env("NLSQL_DATABASES_ROOT")) c.databases_root = *v;
  if (auto v = env("NLSQL_STRICT_SEMANTIC")) c.strict_semantic = env_bool("NLSQL_STRICT_SEMANTIC", *v);
  if (auto v = env("NLSQL_WORKERS")) c.eval.workers = env_int("NLSQL_WORKERS", *v);
  if (auto v = env("NLSQL_TRIALS")) c.eval.trials = env_int("NLSQL_TRIALS", *v);
  if (auto v = env("NLSQL_TIMEOUT_MS")) c.sandbox.timeout = std::chrono::milliseconds(env_int("NLSQL_TIMEOUT_MS", *v));
  if (auto v = env("NLSQL_MAX_ROWS")) c.sandbox.max_rows = static_cast<std::size_t>(env_int("NLSQL_MAX_ROWS", *v));
  if (auto v = env("NLSQL_FALLBACK_TOKEN")) {
    const auto it = c.backends.find(Role::FallbackGenerator);
    if (it != c.backends.end()) it->second.bearer_token = *v;
  }
}

PipelineBackends resolve_backends(const AppConfig& c) {
  c.validate();
  auto ready = [&](Role role) {
    BackendSpec spec = c.backends.at(role);
    if (spec.is_scripted() && !spec.script && role != Role::Embedder) {
      if (spec.fixtures_path.empty()) {
        throw ConfigError("config: scripted backend " + spec.name + " needs a fixtures file");
      }
      spec.script = std::make_shared<ScriptedFixtures>(load_fixtures(spec.fixtures_path));
    }
    return spec;
  };
  return {ready(Role::Decomposer), ready(Role::PrimaryGenerator), ready(Role::FallbackGenerator),
          ready(Role::Embedder)};
}

PipelineOptions pipeline_options(const AppConfig& c) {
  PipelineOptions o;
  o.retrieval = c.retrieval;
  o.validation.limits = c.sandbox;
  o.validation.strict_semantic = c.strict_semantic;
  if (!c.prompts_dir.empty()) o.prompts = PromptTemplates::load(c.prompts_dir);
  return o;
}

}  // namespace nlsql
